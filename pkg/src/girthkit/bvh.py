"""BVH construction and ray-mesh intersection.

The ray-triangle test is the watertight shear/edge-function formulation
(double precision, parametric epsilon 1e-9). The BVH and the brute-force
path share the same test and the same nearest-hit tie-break (lowest
triangle index), so both return bit-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import EmptyMesh, InvalidParam
from .mesh import TriangleMesh

LEAF_SIZE = 4
T_EPS = 1e-9  # parametric epsilon: hits closer than this along the ray are ignored
STACK_CAP = 128


@dataclass(frozen=True)
class RayHit:
    point: np.ndarray  # cm
    distance: float    # cm along the ray
    triangle: int


@dataclass(frozen=True)
class Bvh:
    """Flattened axis-aligned bounding-box tree over a mesh's triangles."""

    mesh: TriangleMesh
    node_min: np.ndarray    # (n_nodes, 3)
    node_max: np.ndarray    # (n_nodes, 3)
    node_left: np.ndarray   # child index, -1 for leaves
    node_right: np.ndarray
    node_start: np.ndarray  # leaf range into tri_order
    node_count: np.ndarray  # 0 for internal nodes
    tri_order: np.ndarray   # permutation of triangle indices
    # per-triangle vertex arrays in original triangle order
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray


def build_bvh(mesh: TriangleMesh) -> Bvh:
    """Build a median-split BVH with leaves of at most 4 triangles."""
    tris = mesh.triangles
    if len(tris) == 0:
        raise EmptyMesh("cannot build a BVH over an empty mesh")
    verts = mesh.vertices
    tv = verts[tris]                       # (M, 3, 3)
    tri_min = tv.min(axis=1)
    tri_max = tv.max(axis=1)
    centroids = tv.mean(axis=1)

    node_min, node_max = [], []
    left, right, start, count = [], [], [], []
    order = np.arange(len(tris))

    def new_node(idx: np.ndarray) -> int:
        i = len(node_min)
        node_min.append(tri_min[idx].min(axis=0))
        node_max.append(tri_max[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(-1)
        count.append(0)
        return i

    # iterative build: stack of (node index, triangle index array, slot offset)
    tri_order = np.empty(len(tris), dtype=np.int64)
    stack = [(new_node(order), order, 0)]
    while stack:
        node, idx, off = stack.pop()
        if len(idx) <= LEAF_SIZE:
            start[node] = off
            count[node] = len(idx)
            tri_order[off:off + len(idx)] = np.sort(idx)
            continue
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        key = c[:, axis]
        half = len(idx) // 2
        part = np.argpartition(key, half)
        li, ri = idx[part[:half]], idx[part[half:]]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((left[node], li, off))
        stack.append((right[node], ri, off + len(li)))

    return Bvh(
        mesh=mesh,
        node_min=np.asarray(node_min, dtype=np.float64),
        node_max=np.asarray(node_max, dtype=np.float64),
        node_left=np.asarray(left, dtype=np.int64),
        node_right=np.asarray(right, dtype=np.int64),
        node_start=np.asarray(start, dtype=np.int64),
        node_count=np.asarray(count, dtype=np.int64),
        tri_order=tri_order,
        v0=np.ascontiguousarray(tv[:, 0]),
        v1=np.ascontiguousarray(tv[:, 1]),
        v2=np.ascontiguousarray(tv[:, 2]),
    )


@njit(cache=True, inline="always")
def _intersect_tri(ox, oy, oz, kx, ky, kz, sx, sy, sz,
                   ax_, ay_, az_, bx_, by_, bz_, cx_, cy_, cz_, t_max):
    """Watertight ray-triangle test; returns hit parameter t or -1."""
    a0 = ax_ - ox; a1 = ay_ - oy; a2 = az_ - oz
    b0 = bx_ - ox; b1 = by_ - oy; b2 = bz_ - oz
    c0 = cx_ - ox; c1 = cy_ - oy; c2 = cz_ - oz
    akz = a0 if kz == 0 else (a1 if kz == 1 else a2)
    bkz = b0 if kz == 0 else (b1 if kz == 1 else b2)
    ckz = c0 if kz == 0 else (c1 if kz == 1 else c2)
    akx = a0 if kx == 0 else (a1 if kx == 1 else a2)
    bkx = b0 if kx == 0 else (b1 if kx == 1 else b2)
    ckx = c0 if kx == 0 else (c1 if kx == 1 else c2)
    aky = a0 if ky == 0 else (a1 if ky == 1 else a2)
    bky = b0 if ky == 0 else (b1 if ky == 1 else b2)
    cky = c0 if ky == 0 else (c1 if ky == 1 else c2)

    axs = akx - sx * akz
    ays = aky - sy * akz
    bxs = bkx - sx * bkz
    bys = bky - sy * bkz
    cxs = ckx - sx * ckz
    cys = cky - sy * ckz

    u = cxs * bys - cys * bxs
    v = axs * cys - ays * cxs
    w = bxs * ays - bys * axs
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return -1.0
    det = u + v + w
    if det == 0.0:
        return -1.0
    t_scaled = u * sz * akz + v * sz * bkz + w * sz * ckz
    t = t_scaled / det
    if t < T_EPS or t > t_max:
        return -1.0
    return t


@njit(cache=True, inline="always")
def _ray_setup(dx, dy, dz):
    adx = abs(dx); ady = abs(dy); adz = abs(dz)
    if adz >= adx and adz >= ady:
        kz = 2
    elif ady >= adx:
        kz = 1
    else:
        kz = 0
    kx = kz + 1
    if kx == 3:
        kx = 0
    ky = kx + 1
    if ky == 3:
        ky = 0
    dkz = dx if kz == 0 else (dy if kz == 1 else dz)
    if dkz < 0.0:
        kx, ky = ky, kx
    dkx = dx if kx == 0 else (dy if kx == 1 else dz)
    dky = dx if ky == 0 else (dy if ky == 1 else dz)
    dkz = dx if kz == 0 else (dy if kz == 1 else dz)
    return kx, ky, kz, dkx / dkz, dky / dkz, 1.0 / dkz


@njit(cache=True, inline="always")
def _box_hit(ox, oy, oz, dx, dy, dz, bmin, bmax, t_best):
    tmin = 0.0
    tmax = t_best
    for a in range(3):
        o = ox if a == 0 else (oy if a == 1 else oz)
        d = dx if a == 0 else (dy if a == 1 else dz)
        if abs(d) < 1e-300:
            if o < bmin[a] or o > bmax[a]:
                return False
        else:
            inv = 1.0 / d
            t1 = (bmin[a] - o) * inv
            t2 = (bmax[a] - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return False
    return True


@njit(cache=True, parallel=True)
def _raycast_bvh_batch(node_min, node_max, node_left, node_right, node_start,
                       node_count, tri_order, v0, v1, v2,
                       origins, dirs, t_maxes, out_t, out_tri):
    n = origins.shape[0]
    for r in prange(n):
        ox = origins[r, 0]; oy = origins[r, 1]; oz = origins[r, 2]
        dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
        kx, ky, kz, sx, sy, sz = _ray_setup(dx, dy, dz)
        best_t = t_maxes[r]
        best_tri = -1
        stack = np.empty(STACK_CAP, dtype=np.int64)
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if not _box_hit(ox, oy, oz, dx, dy, dz,
                            node_min[node], node_max[node], best_t):
                continue
            if node_count[node] > 0:
                s = node_start[node]
                for j in range(node_count[node]):
                    tri = tri_order[s + j]
                    t = _intersect_tri(ox, oy, oz, kx, ky, kz, sx, sy, sz,
                                       v0[tri, 0], v0[tri, 1], v0[tri, 2],
                                       v1[tri, 0], v1[tri, 1], v1[tri, 2],
                                       v2[tri, 0], v2[tri, 1], v2[tri, 2],
                                       best_t)
                    if t >= 0.0 and (t < best_t or
                                     (t == best_t and tri < best_tri)):
                        best_t = t
                        best_tri = tri
            else:
                stack[sp] = node_left[node]
                stack[sp + 1] = node_right[node]
                sp += 2
        if best_tri >= 0:
            out_t[r] = best_t
            out_tri[r] = best_tri
        else:
            out_t[r] = np.inf
            out_tri[r] = -1


@njit(cache=True, parallel=True)
def _raycast_brute_batch(v0, v1, v2, origins, dirs, t_maxes, out_t, out_tri):
    n = origins.shape[0]
    m = v0.shape[0]
    for r in prange(n):
        ox = origins[r, 0]; oy = origins[r, 1]; oz = origins[r, 2]
        dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
        kx, ky, kz, sx, sy, sz = _ray_setup(dx, dy, dz)
        best_t = t_maxes[r]
        best_tri = -1
        for tri in range(m):
            t = _intersect_tri(ox, oy, oz, kx, ky, kz, sx, sy, sz,
                               v0[tri, 0], v0[tri, 1], v0[tri, 2],
                               v1[tri, 0], v1[tri, 1], v1[tri, 2],
                               v2[tri, 0], v2[tri, 1], v2[tri, 2],
                               best_t)
            if t >= 0.0 and t < best_t:
                best_t = t
                best_tri = tri
        if best_tri >= 0:
            out_t[r] = best_t
            out_tri[r] = best_tri
        else:
            out_t[r] = np.inf
            out_tri[r] = -1


def _prep_rays(origins, dirs, t_max):
    origins = np.ascontiguousarray(np.atleast_2d(np.asarray(origins, dtype=np.float64)))
    dirs = np.ascontiguousarray(np.atleast_2d(np.asarray(dirs, dtype=np.float64)))
    if origins.shape != dirs.shape or origins.shape[1] != 3:
        raise InvalidParam("origins and directions must both be (N, 3)")
    t_maxes = np.broadcast_to(np.asarray(t_max, dtype=np.float64),
                              (len(origins),)).copy()
    if np.any(t_maxes <= 0):
        raise InvalidParam("t_max must be > 0")
    return origins, dirs, t_maxes


def raycast_batch(bvh: Bvh, origins, dirs, t_max):
    """Cast many rays; returns (distances, triangle indices), -1/inf on miss."""
    origins, dirs, t_maxes = _prep_rays(origins, dirs, t_max)
    out_t = np.empty(len(origins), dtype=np.float64)
    out_tri = np.empty(len(origins), dtype=np.int64)
    _raycast_bvh_batch(bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
                       bvh.node_start, bvh.node_count, bvh.tri_order,
                       bvh.v0, bvh.v1, bvh.v2, origins, dirs, t_maxes,
                       out_t, out_tri)
    return out_t, out_tri


def raycast_brute(mesh: TriangleMesh, origins, dirs, t_max):
    """Brute-force all-triangle oracle with the same intersection test."""
    origins, dirs, t_maxes = _prep_rays(origins, dirs, t_max)
    tv = mesh.vertices[mesh.triangles]
    out_t = np.empty(len(origins), dtype=np.float64)
    out_tri = np.empty(len(origins), dtype=np.int64)
    _raycast_brute_batch(np.ascontiguousarray(tv[:, 0]),
                         np.ascontiguousarray(tv[:, 1]),
                         np.ascontiguousarray(tv[:, 2]),
                         origins, dirs, t_maxes, out_t, out_tri)
    return out_t, out_tri


def raycast(bvh: Bvh, origin, direction, t_max: float) -> RayHit | None:
    """Nearest intersection of one ray with the mesh, or None on a miss."""
    direction = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > 1e-9:
        raise InvalidParam(f"direction must be unit length, |d| = {norm}")
    ts, tris = raycast_batch(bvh, [origin], [direction], t_max)
    if tris[0] < 0:
        return None
    origin = np.asarray(origin, dtype=np.float64)
    return RayHit(point=origin + ts[0] * direction, distance=float(ts[0]),
                  triangle=int(tris[0]))
