"""Cube-marker extrinsic calibration and multi-view cloud fusion.

A cube of known edge length is captured in several positions by every
camera. Each capture is fitted as three mutually orthogonal planes
(cluster / regress / reassign), the cube centers become the correspondence
points, and cameras are rigidly aligned row-first, then the rows are
chained through the masts to the global reference camera.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .cloud import Intrinsics, PointCloud, estimate_normals
from .errors import (DegenerateConfiguration, InsufficientCorrespondence,
                     InvalidCapture, InvalidParam, IoError, NoConsensus,
                     NonConvergent, ParseError, UnknownCamera)
from .transforms import RigidTransform

SCORE_LAMBDA = 0.1          # rad per cm, weight of center distance in view score
RANSAC_THRESHOLD = 1.0      # cm
RANSAC_ITERATIONS = 500
MARKER_EDGE_DEFAULT = 30.0  # cm


@dataclass(frozen=True)
class CubeMarkerModel:
    """Orthogonal-plane fit of a cube capture.

    Planes are x . normal = offset with normals pointing out of the cube
    toward the sensor; center is edge_length/2 behind each plane.
    """

    normals: np.ndarray        # (3, 3) rows are unit plane normals
    offsets: np.ndarray        # (3,) cm
    center: np.ndarray         # (3,) cm
    edge_length: float
    visible_plane_count: int
    residual_rms: float        # cm

    def __post_init__(self):
        object.__setattr__(self, "normals", np.asarray(self.normals, dtype=np.float64))
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        dots = self.normals @ self.normals.T - np.eye(3)
        if np.max(np.abs(dots)) > 1e-6:
            raise InvalidParam("marker plane normals are not orthonormal")


@dataclass(frozen=True)
class Camera:
    id: int
    row: int
    mast: int
    intrinsics: Intrinsics
    extrinsic: RigidTransform  # camera frame -> reference frame


@dataclass(frozen=True)
class CameraRig:
    """Calibrated camera network; the reference camera sits at identity.

    `world`, when present, maps the reference frame to an external (lab)
    frame; it is carried by synthetic presets so ground-truth placement
    stays recoverable.
    """

    cameras: tuple[Camera, ...]
    reference_id: int
    world: RigidTransform | None = None

    def __post_init__(self):
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise InvalidParam("duplicate camera id in rig")
        if self.reference_id not in ids:
            raise InvalidParam("reference camera not in rig")
        ref = self.camera(self.reference_id)
        if not ref.extrinsic.almost_equal(RigidTransform.identity(), 1e-9, 1e-9):
            raise InvalidParam("reference camera extrinsic must be identity")

    def camera(self, camera_id: int) -> Camera:
        for c in self.cameras:
            if c.id == camera_id:
                return c
        raise UnknownCamera(f"camera {camera_id} not in rig")

    def ids(self) -> list[int]:
        return [c.id for c in self.cameras]

    def world_pose(self, camera_id: int) -> RigidTransform:
        """Camera -> lab frame pose; requires `world`."""
        if self.world is None:
            raise InvalidParam("rig carries no world placement")
        return self.world.compose(self.camera(camera_id).extrinsic)

    def to_dict(self) -> dict:
        return {
            "reference_id": self.reference_id,
            **({"world": self.world.to_dict()} if self.world is not None
               else {}),
            "cameras": [
                {"id": c.id, "row": c.row, "mast": c.mast,
                 "intrinsics": c.intrinsics.to_dict(),
                 **c.extrinsic.to_dict()}
                for c in sorted(self.cameras, key=lambda c: c.id)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraRig":
        cams = tuple(
            Camera(id=int(c["id"]), row=int(c["row"]), mast=int(c["mast"]),
                   intrinsics=Intrinsics.from_dict(c["intrinsics"]),
                   extrinsic=RigidTransform.from_dict(c))
            for c in d["cameras"])
        world = (RigidTransform.from_dict(d["world"]) if "world" in d
                 else None)
        return cls(cameras=cams, reference_id=int(d["reference_id"]),
                   world=world)


def save_rig(rig: CameraRig, path) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(rig.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_rig(path) -> CameraRig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return CameraRig.from_dict(data)


@dataclass
class CaptureSet:
    """Marker position index -> camera id -> cloud of the cube (camera frame)."""

    captures: dict[int, dict[int, PointCloud]] = field(default_factory=dict)
    edge_length: float = MARKER_EDGE_DEFAULT

    def add(self, position: int, camera_id: int, cloud: PointCloud) -> None:
        per_cam = self.captures.setdefault(position, {})
        if camera_id in per_cam:
            raise InvalidParam(
                f"duplicate capture for position {position}, camera {camera_id}")
        per_cam[camera_id] = cloud

    def positions(self) -> list[int]:
        return sorted(self.captures)


# ---------------------------------------------------------------------------
# Cube marker fitting: cluster / regress / reassign
# ---------------------------------------------------------------------------

def _spherical_kmeans(normals: np.ndarray, k: int, iters: int = 30) -> np.ndarray:
    """Deterministic cosine k-means labels via farthest-direction seeding."""
    centers = [normals[0]]
    for _ in range(1, k):
        sims = np.max(np.abs(np.stack([normals @ c for c in centers])), axis=0)
        centers.append(normals[int(np.argmin(sims))])
    centers = np.stack(centers)
    labels = np.zeros(len(normals), dtype=np.int64)
    for _ in range(iters):
        # match on |cos| so sensor-facing sign flips do not split a face
        labels_new = np.argmax(np.abs(normals @ centers.T), axis=1)
        if np.array_equal(labels_new, labels) and _ > 0:
            break
        labels = labels_new
        for c in range(k):
            members = normals[labels == c]
            if len(members) == 0:
                continue
            signs = np.sign(members @ centers[c])
            signs[signs == 0] = 1.0
            m = (members * signs[:, None]).mean(axis=0)
            n = np.linalg.norm(m)
            if n > 0:
                centers[c] = m / n
    return labels


def _orthogonal_planes_fit(points: np.ndarray, labels: np.ndarray,
                           active: list[int], viewpoint: np.ndarray):
    """Fit one plane per cluster, then snap the normals to a rotation."""
    raw_normals, centroids = [], []
    for c in active:
        p = points[labels == c]
        centroid = p.mean(axis=0)
        cov = (p - centroid).T @ (p - centroid)
        _, evecs = np.linalg.eigh(cov)
        n = evecs[:, 0]
        if n @ (viewpoint - centroid) < 0:
            n = -n
        raw_normals.append(n)
        centroids.append(centroid)
    raw = np.stack(raw_normals)
    # nearest orthogonal matrix (polar decomposition) enforces pairwise
    # orthogonality; det may be -1 since cluster order is arbitrary
    u, _, vt = np.linalg.svd(raw)
    normals = u @ vt
    offsets = np.array([normals[i] @ centroids[i] for i in range(len(active))])
    return normals, offsets


def fit_cube_marker(cloud: PointCloud, edge_length: float = MARKER_EDGE_DEFAULT,
                    max_iters: int = 50) -> CubeMarkerModel:
    """Fit three mutually orthogonal cube faces to a capture.

    Pipeline: spherical k-means (k=3) on point normals, orthogonality-
    constrained plane regression, and point-to-plane reassignment, iterated
    until fewer than 0.1% of points move.

    Raises InvalidCapture when fewer than 3 face clusters survive and
    NonConvergent when the iteration cap is hit with RMS residual > 1 cm.
    """
    if edge_length <= 0:
        raise InvalidParam("edge_length must be > 0")
    if cloud.valid_count < 300:
        raise InvalidCapture(
            f"need >= 300 points for a marker fit, have {cloud.valid_count}")
    if cloud.normals is None:
        cloud = estimate_normals(cloud, k=30)
    points = cloud.valid_points()
    normals = cloud.normals[cloud.valid]
    viewpoint = cloud.sensor_origin

    labels = _spherical_kmeans(normals, k=3)
    counts = np.bincount(labels, minlength=3)
    active = [c for c in range(3) if counts[c] >= 0.05 * len(points)]
    if len(active) < 3:
        raise InvalidCapture(
            f"only {len(active)} plane clusters survive (need 3 visible faces)")
    labels = np.array([active.index(l) if l in active else 0 for l in labels])

    plane_n = plane_d = None
    for _ in range(max_iters):
        plane_n, plane_d = _orthogonal_planes_fit(points, labels,
                                                  [0, 1, 2], viewpoint)
        dist = np.abs(points @ plane_n.T - plane_d)   # (N, 3)
        labels_new = np.argmin(dist, axis=1)
        moved = int((labels_new != labels).sum())
        counts = np.bincount(labels_new, minlength=3)
        if counts.min() < 3:
            raise InvalidCapture("a face cluster collapsed during reassignment")
        labels = labels_new
        if moved < 0.001 * len(points):
            break
    else:
        residual = np.sqrt(np.mean(np.min(
            np.abs(points @ plane_n.T - plane_d), axis=1) ** 2))
        if residual > 1.0:
            raise NonConvergent(
                f"marker fit hit {max_iters} iterations with RMS {residual:.3f} cm")

    plane_n, plane_d = _orthogonal_planes_fit(points, labels, [0, 1, 2], viewpoint)
    residual = float(np.sqrt(np.mean(
        (np.take_along_axis(points @ plane_n.T - plane_d,
                            labels[:, None], axis=1)) ** 2)))
    if residual > 1.0:
        raise InvalidCapture(
            f"converged fit leaves RMS residual {residual:.2f} cm; "
            "capture does not show three clean faces")
    # center sits edge_length/2 behind each visible face along its normal
    center = np.linalg.solve(plane_n, plane_d - edge_length / 2.0)
    return CubeMarkerModel(normals=plane_n, offsets=plane_d, center=center,
                           edge_length=edge_length, visible_plane_count=3,
                           residual_rms=residual)


# ---------------------------------------------------------------------------
# Rigid alignment
# ---------------------------------------------------------------------------

def procrustes(src, dst) -> RigidTransform:
    """Least-squares rigid alignment (Kabsch) mapping src onto dst."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InvalidParam("src and dst must be matching (N, 3) arrays")
    if len(src) < 3:
        raise InvalidParam("need at least 3 correspondences")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    h = (src - mu_s).T @ (dst - mu_d)
    u, s, vt = np.linalg.svd(h)
    scale = max(np.linalg.norm(src - mu_s, axis=1).max(),
                np.linalg.norm(dst - mu_d, axis=1).max(), 1e-300)
    if s[1] <= 1e-9 * scale * scale:
        raise DegenerateConfiguration("correspondences are collinear or coincident")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, mu_d - rot @ mu_s)


def ransac_align(src, dst, inlier_threshold: float = RANSAC_THRESHOLD,
                 iterations: int = RANSAC_ITERATIONS,
                 seed: int = 0) -> tuple[RigidTransform, np.ndarray]:
    """Robust Procrustes: returns (transform, sorted inlier indices)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InvalidParam("src and dst must be matching (N, 3) arrays")
    n = len(src)
    if n < 3:
        raise NoConsensus(f"need at least 3 correspondences, have {n}")
    if inlier_threshold <= 0:
        raise InvalidParam("inlier_threshold must be > 0")
    rng = np.random.default_rng(seed)
    best_inliers = None
    for _ in range(iterations):
        pick = rng.choice(n, size=3, replace=False)
        try:
            t = procrustes(src[pick], dst[pick])
        except DegenerateConfiguration:
            continue
        residual = np.linalg.norm(t.apply(src) - dst, axis=1)
        inliers = np.flatnonzero(residual <= inlier_threshold)
        if best_inliers is None or len(inliers) > len(best_inliers):
            best_inliers = inliers
    if best_inliers is None or len(best_inliers) < 3:
        raise NoConsensus("no consensus set of at least 3 correspondences")
    try:
        refit = procrustes(src[best_inliers], dst[best_inliers])
    except DegenerateConfiguration as exc:
        raise NoConsensus(f"consensus set degenerate: {exc}") from exc
    return refit, best_inliers


def score_view_pair(model_a: CubeMarkerModel, model_b: CubeMarkerModel) -> float:
    """Lower-is-better agreement of two marker fits in a common frame.

    Mean matched-normal angle (rad) plus 0.1 rad/cm times the center
    distance.
    """
    from scipy.optimize import linear_sum_assignment

    cos = np.abs(model_a.normals @ model_b.normals.T)
    angles = np.arccos(np.clip(cos, -1.0, 1.0))
    rows, cols = linear_sum_assignment(angles)
    mean_angle = float(angles[rows, cols].mean())
    center_dist = float(np.linalg.norm(model_a.center - model_b.center))
    return mean_angle + SCORE_LAMBDA * center_dist


# ---------------------------------------------------------------------------
# Rig calibration and fusion
# ---------------------------------------------------------------------------

def _fit_all_markers(captures: CaptureSet) -> dict[int, dict[int, CubeMarkerModel]]:
    """Marker models per (position, camera); invalid captures are skipped."""
    models: dict[int, dict[int, CubeMarkerModel]] = {}
    for pos, per_cam in captures.captures.items():
        for cam_id, cloud in per_cam.items():
            try:
                model = fit_cube_marker(cloud, captures.edge_length)
            except (InvalidCapture, NonConvergent):
                continue
            models.setdefault(pos, {})[cam_id] = model
    return models


def _chain_align(nodes: list[int], reference: int,
                 centers: dict[int, dict[int, np.ndarray]],
                 seed: int, label: str) -> dict[int, RigidTransform]:
    """BFS alignment of `nodes` onto `reference` via shared marker centers.

    centers: node -> position -> center point in the node's own frame.
    """
    aligned = {reference: RigidTransform.identity()}
    pending = [n for n in nodes if n != reference]
    progress = True
    while pending and progress:
        progress = False
        for node in list(pending):
            best_anchor, shared = None, []
            for anchor in aligned:
                common = sorted(set(centers.get(node, {}))
                                & set(centers.get(anchor, {})))
                if len(common) > len(shared):
                    best_anchor, shared = anchor, common
            if len(shared) < 3:
                continue
            src = np.stack([centers[node][p] for p in shared])
            dst = np.stack([centers[best_anchor][p] for p in shared])
            t, _ = ransac_align(src, dst, seed=seed + node)
            aligned[node] = aligned[best_anchor].compose(t)
            pending.remove(node)
            progress = True
    if pending:
        raise InsufficientCorrespondence(
            f"{label} {pending} share fewer than 3 valid marker positions "
            "with the aligned set")
    return aligned


def calibrate_rig(captures: CaptureSet, topology: dict[int, tuple[int, int]],
                  intrinsics: dict[int, Intrinsics] | None = None,
                  seed: int = 0) -> CameraRig:
    """Two-stage extrinsic calibration from cube-marker captures.

    topology maps camera id -> (row, mast). Stage 1 aligns cameras within
    each row to the row's lowest-id camera; stage 2 aligns rows to the
    global reference row through cameras that share a mast.
    """
    models = _fit_all_markers(captures)
    cam_centers: dict[int, dict[int, np.ndarray]] = {}
    for pos, per_cam in models.items():
        for cam_id, model in per_cam.items():
            cam_centers.setdefault(cam_id, {})[pos] = model.center

    all_ids = sorted(topology)
    for cam_id in all_ids:
        if len(cam_centers.get(cam_id, {})) < 3:
            raise InsufficientCorrespondence(
                f"camera {cam_id} has only "
                f"{len(cam_centers.get(cam_id, {}))} valid marker positions")

    rows: dict[int, list[int]] = {}
    for cam_id, (row, _mast) in topology.items():
        rows.setdefault(row, []).append(cam_id)

    # stage 1: per-row alignment to the row's lowest camera id
    to_row: dict[int, RigidTransform] = {}
    row_ref: dict[int, int] = {}
    for row, members in rows.items():
        ref = min(members)
        row_ref[row] = ref
        aligned = _chain_align(sorted(members), ref, cam_centers, seed,
                               f"cameras in row {row}")
        to_row.update(aligned)

    # stage 2: align rows through masts to the global reference camera's row
    global_ref = min(all_ids)
    ref_row = topology[global_ref][0]
    row_centers: dict[int, dict[int, np.ndarray]] = {}
    for row, members in rows.items():
        agg: dict[int, list[np.ndarray]] = {}
        for cam_id in members:
            for pos, center in cam_centers[cam_id].items():
                agg.setdefault(pos, []).append(to_row[cam_id].apply(center))
        row_centers[row] = {p: np.mean(v, axis=0) for p, v in agg.items()}
    row_align = _chain_align(sorted(rows), ref_row, row_centers, seed + 10000,
                             "rows")

    # gauge-fix on the global reference camera
    to_ref_row = {cam_id: row_align[topology[cam_id][0]].compose(to_row[cam_id])
                  for cam_id in all_ids}
    gauge = to_ref_row[global_ref].inverse()
    default_intr = Intrinsics(fx=320.0, fy=320.0, cx=319.5, cy=239.5,
                              width=640, height=480)
    cams = tuple(
        Camera(id=cam_id, row=topology[cam_id][0], mast=topology[cam_id][1],
               intrinsics=(intrinsics or {}).get(cam_id, default_intr),
               extrinsic=gauge.compose(to_ref_row[cam_id]))
        for cam_id in all_ids)
    # snap the reference to exact identity (it is identity up to rounding)
    cams = tuple(replace(c, extrinsic=RigidTransform.identity())
                 if c.id == global_ref else c for c in cams)
    return CameraRig(cameras=cams, reference_id=global_ref)


def fuse(clouds: dict[int, PointCloud], rig: CameraRig) -> PointCloud:
    """Map per-camera clouds into the reference frame and concatenate."""
    points, normals = [], []
    have_normals = all(c.normals is not None for c in clouds.values())
    for cam_id, cloud in clouds.items():
        cam = rig.camera(cam_id)  # raises UnknownCamera
        t = rig.world_pose(cam_id) if rig.world is not None else cam.extrinsic
        points.append(t.apply(cloud.valid_points()))
        if have_normals:
            normals.append(t.apply_vectors(cloud.normals[cloud.valid]))
    return PointCloud(points=np.concatenate(points) if points else np.empty((0, 3)),
                      normals=np.concatenate(normals) if have_normals and normals
                      else None)
