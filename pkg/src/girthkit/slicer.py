"""Simplified band-contour mesher for fused point clouds.

Points are binned into height bands along an axis; each band becomes an
angle-ordered contour (decimated to at most 128 points) and adjacent
contours are zipped into triangle strips by nearest-angle matching. A
desk-scale stand-in for a full surface reconstruction, good enough to
take girth measurements on.
"""
from __future__ import annotations

import numpy as np

from .cloud import PointCloud
from .errors import InsufficientPoints, InvalidParam
from .mesh import TriangleMesh
from .transforms import plane_basis, unit

MAX_CONTOUR_POINTS = 128
MIN_BAND_POINTS = 3


def _band_contour(points: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Order a band's points by angle about its centroid and decimate."""
    centroid = points.mean(axis=0)
    rel = points - centroid
    ang = np.arctan2(rel @ v, rel @ u)
    order = np.argsort(ang, kind="stable")
    pts = points[order]
    if len(pts) > MAX_CONTOUR_POINTS:
        step = len(pts) / MAX_CONTOUR_POINTS
        idx = (np.arange(MAX_CONTOUR_POINTS) * step).astype(np.int64)
        pts = pts[idx]
    return pts


def _zip_contours(a_idx: np.ndarray, a_ang: np.ndarray,
                  b_idx: np.ndarray, b_ang: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangle strip between two angle-sorted rings (global vertex ids)."""
    tris = []
    na, nb = len(a_idx), len(b_idx)
    i = j = 0
    # advance whichever ring's next vertex comes first in angle
    while i < na or j < nb:
        ai, aj = a_idx[i % na], b_idx[j % nb]
        next_a = a_ang[(i + 1) % na] + (2 * np.pi if i + 1 >= na else 0.0)
        next_b = b_ang[(j + 1) % nb] + (2 * np.pi if j + 1 >= nb else 0.0)
        if i < na and (j >= nb or next_a <= next_b):
            tris.append((ai, a_idx[(i + 1) % na], aj))
            i += 1
        else:
            tris.append((ai, b_idx[(j + 1) % nb], aj))
            j += 1
    return tris


def slice_mesh(cloud: PointCloud, band_height: float, axis=(0.0, 0.0, 1.0)
               ) -> TriangleMesh:
    """Mesh a cloud as stacked band contours stitched into strips.

    Bands with fewer than 3 points are skipped; at least 2 adjacent
    populated bands are required.
    """
    if band_height <= 0:
        raise InvalidParam("band_height must be > 0")
    axis = unit(axis)
    pts = cloud.valid_points()
    if len(pts) < 2 * MIN_BAND_POINTS:
        raise InsufficientPoints(f"cloud has only {len(pts)} points")
    u, v = plane_basis(axis)
    d = pts @ axis
    band = np.floor((d - d.min()) / band_height).astype(np.int64)

    contours: list[tuple[int, np.ndarray]] = []
    for b in np.unique(band):
        members = pts[band == b]
        if len(members) < MIN_BAND_POINTS:
            continue  # degenerate band, skipped
        contours.append((int(b), _band_contour(members, u, v)))

    pairs = [(contours[k], contours[k + 1]) for k in range(len(contours) - 1)
             if contours[k + 1][0] - contours[k][0] == 1]
    if not pairs:
        raise InsufficientPoints("need at least 2 adjacent populated bands")

    vertices = []
    offsets = {}
    for b, pts_b in contours:
        offsets[b] = len(vertices)
        vertices.extend(pts_b)
    vertices = np.asarray(vertices)
    centroid = vertices.mean(axis=0)

    def ring(entry):
        b, pts_b = entry
        idx = offsets[b] + np.arange(len(pts_b))
        rel = pts_b - centroid
        ang = np.arctan2(rel @ v, rel @ u)
        # re-sort by angle about the common centroid so both rings agree
        order = np.argsort(ang, kind="stable")
        return idx[order], np.sort(ang)

    tris = []
    for lower, upper in pairs:
        a_idx, a_ang = ring(lower)
        b_idx, b_ang = ring(upper)
        tris.extend(_zip_contours(a_idx, a_ang, b_idx, b_ang))

    mesh = TriangleMesh.cleaned(vertices, np.asarray(tris, dtype=np.int64))
    if mesh.triangle_count == 0:
        raise InsufficientPoints("band stitching produced no usable triangles")
    return mesh
