"""Point clouds and the depth pre-processing chain.

Clouds are either unorganized (a bag of points) or organized: a sensor
pixel grid of ``width x height`` slots where invalid slots are allowed.
The image-style filters (median, bilateral) require an organized cloud and
only move points along their pixel ray, i.e. they rescale depth.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParam, IoError, NotOrganized, ParseError
from .mesh import read_ply, write_ply


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole projection parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidParam("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidParam("image size must be positive")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
                   width=int(d["width"]), height=int(d["height"]))

    def pixel_dirs(self) -> np.ndarray:
        """(height, width, 3) unnormalized camera-frame ray directions, z=1."""
        j = np.arange(self.width, dtype=np.float64)
        i = np.arange(self.height, dtype=np.float64)
        x = (j - self.cx) / self.fx
        y = (i - self.cy) / self.fy
        xx, yy = np.meshgrid(x, y)
        return np.stack([xx, yy, np.ones_like(xx)], axis=-1)


@dataclass(frozen=True)
class PointCloud:
    """Point set in cm; organized when width/height are set."""

    points: np.ndarray
    normals: np.ndarray | None = None
    valid: np.ndarray | None = None
    width: int | None = None
    height: int | None = None
    sensor_origin: np.ndarray | None = None
    intrinsics: Intrinsics | None = None
    normals_low_confidence: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParam(f"points must be (N, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        if (self.width is None) != (self.height is None):
            raise InvalidParam("width and height must be set together")
        if self.width is not None and self.width * self.height != len(pts):
            raise InvalidParam("organized cloud: width*height must equal slot count")
        if self.valid is None:
            object.__setattr__(self, "valid",
                               np.ones(len(pts), dtype=bool))
        else:
            v = np.asarray(self.valid, dtype=bool)
            if v.shape != (len(pts),):
                raise InvalidParam("valid mask must parallel points")
            object.__setattr__(self, "valid", v)
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64)
            if nrm.shape != pts.shape:
                raise InvalidParam("normals must parallel points")
            lens = np.linalg.norm(nrm[self.valid], axis=1)
            if lens.size and np.max(np.abs(lens - 1.0)) > 1e-6:
                raise InvalidParam("normals must be unit length")
            object.__setattr__(self, "normals", nrm)
        so = self.sensor_origin
        so = np.zeros(3) if so is None else np.asarray(so, dtype=np.float64)
        object.__setattr__(self, "sensor_origin", so)

    @property
    def organized(self) -> bool:
        return self.width is not None

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def valid_points(self) -> np.ndarray:
        return self.points[self.valid]

    def depths(self) -> np.ndarray:
        """Camera-frame depth (z relative to the sensor origin) per slot."""
        return self.points[:, 2] - self.sensor_origin[2]

    def unorganized(self) -> "PointCloud":
        if not self.organized:
            return self
        keep = self.valid
        return PointCloud(
            points=self.points[keep],
            normals=None if self.normals is None else self.normals[keep],
            sensor_origin=self.sensor_origin)


def _require_organized(cloud: PointCloud, who: str):
    if not cloud.organized:
        raise NotOrganized(f"{who} requires an organized cloud")


def _rescale_depths(cloud: PointCloud, new_depth: np.ndarray,
                    still_valid: np.ndarray) -> PointCloud:
    """Move points along their pixel rays so their depth becomes new_depth."""
    old = cloud.depths()
    scale = np.ones_like(old)
    ok = still_valid & (old != 0)
    scale[ok] = new_depth[ok] / old[ok]
    pts = cloud.sensor_origin + (cloud.points - cloud.sensor_origin) * scale[:, None]
    return replace(cloud, points=pts, valid=still_valid, normals=None,
                   normals_low_confidence=None)


def truncate_depth(cloud: PointCloud, z_max: float) -> PointCloud:
    """Drop (or invalidate, when organized) points deeper than z_max."""
    if z_max <= 0:
        raise InvalidParam("z_max must be > 0")
    keep = cloud.valid & (cloud.depths() <= z_max)
    if cloud.organized:
        return replace(cloud, valid=keep)
    return PointCloud(points=cloud.points[keep],
                      normals=None if cloud.normals is None else cloud.normals[keep],
                      sensor_origin=cloud.sensor_origin)


def median_filter(cloud: PointCloud, window: int = 5) -> PointCloud:
    """Replace each valid depth by the median of valid depths in its window."""
    _require_organized(cloud, "median_filter")
    if window < 3 or window % 2 == 0:
        raise InvalidParam("window must be an odd integer >= 3")
    h, w = cloud.height, cloud.width
    depth = cloud.depths().reshape(h, w).copy()
    depth[~cloud.valid.reshape(h, w)] = np.nan
    r = window // 2
    padded = np.pad(depth, r, mode="constant", constant_values=np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    with np.errstate(all="ignore"), warnings.catch_warnings():
        # all-NaN windows are expected outside the figure silhouette
        warnings.simplefilter("ignore", category=RuntimeWarning)
        med = np.nanmedian(windows.reshape(h, w, -1), axis=-1)
    new_depth = np.where(np.isnan(depth), depth, med).ravel()
    return _rescale_depths(cloud, np.nan_to_num(new_depth), cloud.valid.copy())


def bilateral_filter(cloud: PointCloud, sigma_s: float = 3.0,
                     sigma_r: float = 2.0) -> PointCloud:
    """Edge-preserving depth smoothing.

    Weight of neighbor q for pixel p:
    exp(-|p-q|^2 / 2*sigma_s^2) * exp(-(d(p)-d(q))^2 / 2*sigma_r^2),
    window radius ceil(3*sigma_s); invalid pixels carry no weight.
    """
    _require_organized(cloud, "bilateral_filter")
    if sigma_s <= 0 or sigma_r <= 0:
        raise InvalidParam("sigma_s and sigma_r must be > 0")
    h, w = cloud.height, cloud.width
    valid = cloud.valid.reshape(h, w)
    depth = cloud.depths().reshape(h, w)
    radius = math.ceil(3 * sigma_s)
    acc = np.zeros((h, w))
    wsum = np.zeros((h, w))
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            src_i = slice(max(0, -di), min(h, h - di))
            src_j = slice(max(0, -dj), min(w, w - dj))
            dst_i = slice(max(0, di), min(h, h + di))
            dst_j = slice(max(0, dj), min(w, w + dj))
            dq = depth[src_i, src_j]
            vq = valid[src_i, src_j]
            dp = depth[dst_i, dst_j]
            ws = math.exp(-(di * di + dj * dj) / (2 * sigma_s * sigma_s))
            wr = np.exp(-((dp - dq) ** 2) / (2 * sigma_r * sigma_r))
            wgt = np.where(vq, ws * wr, 0.0)
            acc[dst_i, dst_j] += wgt * np.where(vq, dq, 0.0)
            wsum[dst_i, dst_j] += wgt
    new_depth = np.where(wsum > 0, acc / np.where(wsum > 0, wsum, 1.0), depth)
    new_depth = np.where(valid, new_depth, depth).ravel()
    return _rescale_depths(cloud, np.nan_to_num(new_depth), cloud.valid.copy())


def sor_filter(cloud: PointCloud, k: int = 50,
               stddev_mult: float = 1.0) -> PointCloud:
    """Statistical outlier removal on mean k-NN distance."""
    if k < 1 or stddev_mult <= 0:
        raise InvalidParam("k must be >= 1 and stddev_mult > 0")
    pts = cloud.valid_points()
    if len(pts) <= k:
        raise InvalidParam(f"need more than k={k} points, have {len(pts)}")
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=k + 1)
    mean_dist = dist[:, 1:].mean(axis=1)
    mu, sigma = mean_dist.mean(), mean_dist.std()
    keep_local = mean_dist <= mu + stddev_mult * sigma
    if cloud.organized:
        keep = cloud.valid.copy()
        keep[np.flatnonzero(cloud.valid)[~keep_local]] = False
        return replace(cloud, valid=keep)
    return PointCloud(points=pts[keep_local],
                      normals=(None if cloud.normals is None
                               else cloud.normals[cloud.valid][keep_local]),
                      sensor_origin=cloud.sensor_origin)


def estimate_normals(cloud: PointCloud, k: int = 30,
                     viewpoint=None) -> PointCloud:
    """Per-point normals from the k-NN covariance, oriented toward viewpoint.

    The normal is the smallest-eigenvalue eigenvector of the neighborhood
    covariance (neighborhood = the k nearest points including the point).
    Near-collinear neighborhoods are flagged low-confidence.
    """
    if k < 3:
        raise InvalidParam("k must be >= 3")
    pts = cloud.valid_points()
    if len(pts) <= k:
        raise InvalidParam(f"need more than k={k} points, have {len(pts)}")
    viewpoint = (cloud.sensor_origin if viewpoint is None
                 else np.asarray(viewpoint, dtype=np.float64))
    tree = cKDTree(pts)
    normals = np.empty_like(pts)
    low_conf = np.zeros(len(pts), dtype=bool)
    chunk = 20000
    for s in range(0, len(pts), chunk):
        e = min(s + chunk, len(pts))
        _, nn = tree.query(pts[s:e], k=k)
        nbrs = pts[nn]                                  # (c, k, 3)
        centered = nbrs - nbrs.mean(axis=1, keepdims=True)
        cov = np.einsum("cki,ckj->cij", centered, centered) / k
        evals, evecs = np.linalg.eigh(cov)
        n = evecs[:, :, 0]
        low_conf[s:e] = evals[:, 1] < 1e-12 * np.maximum(evals[:, 2], 1e-300)
        flip = np.einsum("ci,ci->c", n, viewpoint - pts[s:e]) < 0
        n[flip] *= -1.0
        normals[s:e] = n
    if cloud.organized:
        full = np.zeros_like(cloud.points)
        full[cloud.valid] = normals
        full_lc = np.zeros(len(cloud.points), dtype=bool)
        full_lc[cloud.valid] = low_conf
        return replace(cloud, normals=full, normals_low_confidence=full_lc)
    return replace(cloud, points=pts, valid=None, normals=normals,
                   normals_low_confidence=low_conf)


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def load_cloud(path) -> PointCloud:
    """Read an unorganized cloud (points + optional normals) from PLY."""
    vertices, normals, _faces = read_ply(path)
    return PointCloud(points=vertices, normals=normals)


def save_cloud(cloud: PointCloud, path, binary: bool = True) -> None:
    pts = cloud.valid_points()
    normals = None
    if cloud.normals is not None:
        normals = cloud.normals[cloud.valid]
    write_ply(path, pts, faces=None, normals=normals, binary=binary)


def save_depth_grid(cloud: PointCloud, path) -> None:
    """Raw organized format: one JSON header line + little-endian f32 depths."""
    _require_organized(cloud, "save_depth_grid")
    if cloud.intrinsics is None:
        raise InvalidParam("organized raw format requires intrinsics")
    header = {"width": cloud.width, "height": cloud.height,
              "intrinsics": cloud.intrinsics.to_dict(),
              "sensor_origin": [float(v) for v in cloud.sensor_origin]}
    depth = cloud.depths().astype("<f4").copy()
    depth[~cloud.valid] = np.nan
    try:
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
            fh.write(depth.tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_depth_grid(path) -> PointCloud:
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    try:
        header = json.loads(header_line)
        w, h = int(header["width"]), int(header["height"])
        intr = Intrinsics.from_dict(header["intrinsics"])
        origin = np.asarray(header["sensor_origin"], dtype=np.float64)
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{path}: bad depth-grid header") from exc
    depth = np.frombuffer(blob, dtype="<f4")
    if depth.size != w * h:
        raise ParseError(f"{path}: expected {w * h} depths, got {depth.size}")
    depth = depth.astype(np.float64)
    valid = np.isfinite(depth)
    dirs = intr.pixel_dirs().reshape(-1, 3)
    pts = origin + dirs * np.nan_to_num(depth)[:, None]
    return PointCloud(points=pts, valid=valid, width=w, height=h,
                      sensor_origin=origin, intrinsics=intr)
