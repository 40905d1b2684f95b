"""Triangle mesh container and PLY/OBJ file I/O.

All coordinates are centimeters. PLY support covers format 1.0 in both
``ascii`` and ``binary_little_endian`` flavors; OBJ support covers ``v``
and ``f`` records (texture/normal indices on faces are ignored).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyMesh, InvalidParam, IoError, ParseError

DEGENERATE_AREA = 1e-10  # cm^2, triangles below this are dropped on load


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise InvalidParam(f"expected (N, 3) array, got shape {a.shape}")
    return np.ascontiguousarray(a)


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    v0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - v0
    e2 = vertices[triangles[:, 2]] - v0
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle mesh.

    Invariants enforced at construction: triangle indices in range, finite
    vertex coordinates, no degenerate (area < 1e-10 cm^2) triangles.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None
    dropped_degenerate: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_points(self.vertices))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if tris.size == 0:
            tris = tris.reshape(0, 3)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise InvalidParam(f"triangles must be (M, 3), got {tris.shape}")
        object.__setattr__(self, "triangles", tris)
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidParam("mesh has non-finite vertex coordinates")
        n = len(self.vertices)
        if tris.size and (tris.min() < 0 or tris.max() >= n):
            raise InvalidParam("triangle index out of range")
        if tris.size and triangle_areas(self.vertices, tris).min() < DEGENERATE_AREA:
            raise InvalidParam("mesh contains degenerate triangles")
        if self.normals is not None:
            nrm = _as_points(self.normals)
            if len(nrm) != n:
                raise InvalidParam("normals must parallel vertices")
            object.__setattr__(self, "normals", nrm)
        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False

    @classmethod
    def cleaned(cls, vertices, triangles, normals=None) -> "TriangleMesh":
        """Build a mesh, silently dropping degenerate triangles."""
        vertices = _as_points(vertices)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles):
            keep = triangle_areas(vertices, triangles) >= DEGENERATE_AREA
            dropped = int((~keep).sum())
            triangles = triangles[keep]
        else:
            dropped = 0
        return cls(vertices, triangles, normals, dropped_degenerate=dropped)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        lo, hi = self.bounds()
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max())
        return center, radius

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "TriangleMesh":
        verts = self.vertices @ np.asarray(rotation).T + np.asarray(translation)
        normals = None
        if self.normals is not None:
            normals = self.normals @ np.asarray(rotation).T
        return TriangleMesh(verts, self.triangles, normals)


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_SCALARS = {
    "char": "b", "int8": "b",
    "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i",
    "uint": "I", "uint32": "I",
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
}


def _fan(indices: list[int]) -> list[tuple[int, int, int]]:
    return [(indices[0], indices[i], indices[i + 1]) for i in range(1, len(indices) - 1)]


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    """Parse a PLY file into (vertices, normals or None, faces).

    Faces with more than 3 indices are fan-triangulated; a vertex-only file
    yields an empty face array.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not data.startswith(b"ply"):
        raise ParseError(f"{path}: not a PLY file")
    end = data.find(b"end_header\n")
    if end < 0:
        raise ParseError(f"{path}: missing end_header")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop_name, scalar) | (prop_name, 'list', count_t, item_t)])
    for line in header[1:]:
        tok = line.split()
        if not tok or tok[0] == "comment":
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element")
            if tok[1] == "list":
                elements[-1][2].append((tok[4], "list", tok[2], tok[3]))
            else:
                elements[-1][2].append((tok[2], tok[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"{path}: unsupported format {fmt!r}")

    vertices, normals, faces = None, None, []
    try:
        if fmt == "ascii":
            tokens = body.split()
            pos = 0
            for name, count, props in elements:
                rows = []
                for _ in range(count):
                    row = {}
                    for p in props:
                        if p[1] == "list":
                            n = int(tokens[pos]); pos += 1
                            row[p[0]] = [int(tokens[pos + i]) for i in range(n)]
                            pos += n
                        else:
                            row[p[0]] = float(tokens[pos]); pos += 1
                    rows.append(row)
                vertices, normals, faces = _collect_ply_element(
                    name, rows, vertices, normals, faces)
        else:
            off = 0
            for name, count, props in elements:
                rows = []
                for _ in range(count):
                    row = {}
                    for p in props:
                        if p[1] == "list":
                            cf = _PLY_SCALARS[p[2]]
                            n = struct.unpack_from("<" + cf, body, off)[0]
                            off += struct.calcsize(cf)
                            itf = _PLY_SCALARS[p[3]]
                            vals = struct.unpack_from(f"<{n}{itf}", body, off)
                            off += struct.calcsize(itf) * n
                            row[p[0]] = [int(v) for v in vals]
                        else:
                            sf = _PLY_SCALARS[p[1]]
                            row[p[0]] = struct.unpack_from("<" + sf, body, off)[0]
                            off += struct.calcsize(sf)
                    rows.append(row)
                vertices, normals, faces = _collect_ply_element(
                    name, rows, vertices, normals, faces)
    except (IndexError, struct.error, ValueError, KeyError) as exc:
        raise ParseError(f"{path}: truncated or malformed PLY body ({exc})") from exc

    if vertices is None:
        raise ParseError(f"{path}: no vertex element")
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    return vertices, normals, faces


def _collect_ply_element(name, rows, vertices, normals, faces):
    if name == "vertex":
        vertices = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=np.float64)
        vertices = vertices.reshape(-1, 3)
        if rows and all(k in rows[0] for k in ("nx", "ny", "nz")):
            normals = np.array([[r["nx"], r["ny"], r["nz"]] for r in rows],
                               dtype=np.float64)
    elif name == "face":
        for r in rows:
            idx = r.get("vertex_indices") or r.get("vertex_index")
            if idx is None or len(idx) < 3:
                raise ParseError("face with fewer than 3 indices")
            faces.extend(_fan(list(idx)))
    return vertices, normals, faces


def write_ply(path, vertices, faces=None, normals=None, binary: bool = True) -> None:
    """Write vertices (+optional normals, faces) as PLY 1.0."""
    vertices = _as_points(vertices)
    fmt = "binary_little_endian" if binary else "ascii"
    lines = ["ply", f"format {fmt} 1.0", f"element vertex {len(vertices)}",
             "property double x", "property double y", "property double z"]
    if normals is not None:
        normals = _as_points(normals)
        lines += ["property double nx", "property double ny", "property double nz"]
    nfaces = 0 if faces is None else len(faces)
    if faces is not None:
        lines.append(f"element face {nfaces}")
        lines.append("property list uchar int vertex_indices")
    lines.append("end_header")
    header = ("\n".join(lines) + "\n").encode("ascii")

    try:
        with open(path, "wb") as fh:
            fh.write(header)
            vdata = vertices if normals is None else np.hstack([vertices, normals])
            if binary:
                fh.write(vdata.astype("<f8").tobytes())
                if faces is not None:
                    for tri in np.asarray(faces, dtype=np.int64):
                        fh.write(struct.pack("<B3i", 3, *tri))
            else:
                for row in vdata:
                    fh.write((" ".join(format(v, ".17g") for v in row) + "\n").encode())
                if faces is not None:
                    for tri in np.asarray(faces, dtype=np.int64):
                        fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n".encode())
    except OSError as exc:
        raise IoError(str(exc)) from exc


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------

def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            if len(tok) < 4:
                raise ParseError(f"{path}:{lineno}: short vertex record")
            try:
                verts.append([float(tok[1]), float(tok[2]), float(tok[3])])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad vertex") from exc
        elif tok[0] == "f":
            idx = []
            for t in tok[1:]:
                try:
                    i = int(t.split("/")[0])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad face index") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise ParseError(f"{path}:{lineno}: face with < 3 vertices")
            faces.extend(_fan(idx))
    verts = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ParseError(f"{path}: face index out of range")
    return verts, faces


# ---------------------------------------------------------------------------
# Mesh-level entry points
# ---------------------------------------------------------------------------

def _format_for(path, format=None) -> str:
    if format:
        return format.lower()
    suffix = Path(path).suffix.lower()
    if suffix in (".ply", ".obj"):
        return suffix[1:]
    raise InvalidParam(f"cannot infer mesh format from {path}")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Load a triangle mesh from a PLY or OBJ file.

    Quads and larger polygons are fan-triangulated; degenerate triangles are
    dropped (the count is kept on the mesh). Raises ParseError on malformed
    input and EmptyMesh when no triangle survives.
    """
    fmt = _format_for(path, format)
    if fmt == "ply":
        vertices, normals, faces = read_ply(path)
    elif fmt == "obj":
        vertices, faces = read_obj(path)
        normals = None
    else:
        raise InvalidParam(f"unsupported mesh format {fmt!r}")
    if len(faces) == 0:
        raise EmptyMesh(f"{path}: no faces")
    try:
        mesh = TriangleMesh.cleaned(vertices, faces, normals)
    except InvalidParam as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if mesh.triangle_count == 0:
        raise EmptyMesh(f"{path}: all faces degenerate")
    return mesh


def save_mesh(mesh: TriangleMesh, path, format: str | None = None,
              binary: bool = True) -> None:
    """Write a mesh as PLY (ascii or binary) or OBJ."""
    fmt = _format_for(path, format)
    if fmt == "ply":
        write_ply(path, mesh.vertices, mesh.triangles, mesh.normals, binary=binary)
    elif fmt == "obj":
        try:
            with open(path, "w") as fh:
                for v in mesh.vertices:
                    fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
                for t in mesh.triangles:
                    fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        except OSError as exc:
            raise IoError(str(exc)) from exc
    else:
        raise InvalidParam(f"unsupported mesh format {fmt!r}")
