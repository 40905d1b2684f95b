"""Accuracy studies over synthetic shapes and simulated rigs.

`run_measurement_sweep` reproduces the ray-count convergence study on the
parametric shape family; `run_calibration_trial` exercises the cube-marker
calibration end to end against simulator ground truth. Reports serialize
deterministically (wall time is kept in memory only).
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .bvh import build_bvh
from .calib import CaptureSet, calibrate_rig
from .errors import InsufficientCorrespondence, InvalidParam, IoError
from .probes import CircleProbe, CylinderProbe, measure_section, measure_volume
from .synth import (ShapeSpec, VirtualCamera, gen_cube, gen_shape, rig_preset,
                    simulate_depth)
from .transforms import RigidTransform, rotation_about_axis, rotation_angle_deg

REPORT_SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "shape", "ray_count",
    "perimeter_est", "perimeter_true", "perimeter_rel_err",
    "area_est", "area_true", "area_rel_err",
    "volume_est", "volume_true", "volume_rel_err",
]


@dataclass(frozen=True)
class BenchmarkRow:
    shape: str
    ray_count: int
    perimeter_est: float
    perimeter_true: float
    area_est: float
    area_true: float
    volume_est: float
    volume_true: float
    wall_time_s: float = field(compare=False, default=0.0)

    def rel_err(self, kind: str) -> float:
        est = getattr(self, f"{kind}_est")
        true = getattr(self, f"{kind}_true")
        return abs(est - true) / true


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchmarkRow, ...]
    seed: int = 0
    slice_h: float = 1.0

    def summary(self) -> dict[int, dict[str, float]]:
        """Average relative error per ray count, recomputed from the rows."""
        out: dict[int, dict[str, float]] = {}
        for rc in sorted({r.ray_count for r in self.rows}):
            rows = [r for r in self.rows if r.ray_count == rc]
            out[rc] = {kind: sum(r.rel_err(kind) for r in rows) / len(rows)
                       for kind in ("perimeter", "area", "volume")}
        return out


def run_measurement_sweep(shapes: list[ShapeSpec], ray_counts: list[int],
                          h: float = 1.0, seed: int = 0) -> BenchmarkReport:
    """Measure every shape at every ray count against analytic truth.

    Sections are taken at each shape's mid-height; volumes integrate the
    full shape with slab height h. Rows are sorted by (shape label,
    ray count) so aggregation order is deterministic.
    """
    if not shapes:
        raise InvalidParam("shape list must be non-empty")
    for rc in ray_counts:
        if rc < 8 or rc > 10 ** 6:
            raise InvalidParam(f"ray_count {rc} outside [8, 1e6]")
    rows = []
    for spec in sorted(shapes, key=lambda s: s.label()):
        mesh = gen_shape(spec)
        bvh = build_bvh(mesh)
        z_lo, z_hi = spec.z_extent
        z_ref = spec.reference_height
        for rc in sorted(ray_counts):
            t0 = time.perf_counter()
            section = measure_section(
                bvh, CircleProbe(center=(0.0, 0.0, z_ref),
                                 normal=(0.0, 0.0, 1.0), ray_count=rc))
            vol = measure_volume(
                bvh, CylinderProbe(base=CircleProbe(center=(0.0, 0.0, z_hi),
                                                    normal=(0.0, 0.0, 1.0),
                                                    ray_count=rc),
                                   height=z_hi - z_lo, h=h))
            rows.append(BenchmarkRow(
                shape=spec.label(), ray_count=rc,
                perimeter_est=section.perimeter,
                perimeter_true=spec.perimeter_at(z_ref),
                area_est=section.area, area_true=spec.area_at(z_ref),
                volume_est=vol.volume, volume_true=spec.volume(),
                wall_time_s=time.perf_counter() - t0))
    return BenchmarkReport(rows=tuple(rows), seed=seed, slice_h=h)


def default_shape_suite() -> list[ShapeSpec]:
    """The paper-style shape family with analytic ground truths."""
    return [
        ShapeSpec(kind="cube", size=15.0),
        ShapeSpec(kind="cube", size=50.0),
        ShapeSpec(kind="cylinder", radius=25.0, height=50.0),
        ShapeSpec(kind="cone", radius=25.0, height=50.0),
        ShapeSpec(kind="pyramid", size=30.0, height=30.0),
    ]


# ---------------------------------------------------------------------------
# Calibration trials
# ---------------------------------------------------------------------------

def marker_poses(positions: int, seed: int = 0) -> list[RigidTransform]:
    """Seeded cube placements spread through the capture volume.

    Orientations are tilted well away from face-on so every camera sees
    three faces.
    """
    rng = np.random.default_rng(seed)
    poses = []
    for k in range(positions):
        az = 2.0 * np.pi * k / positions + rng.uniform(-0.3, 0.3)
        radius = rng.uniform(5.0, 20.0)
        height = rng.uniform(95.0, 125.0)
        center = np.array([radius * np.cos(az), radius * np.sin(az), height])
        # 45 deg azimuth twist points a cube corner at every mast, so each
        # camera sees a top/bottom face plus two side faces well off grazing
        rot = (rotation_about_axis((0.0, 0.0, 1.0),
                                   np.pi / 4 + rng.uniform(-0.15, 0.15))
               @ rotation_about_axis((1.0, 0.0, 0.0), rng.uniform(-0.12, 0.12))
               @ rotation_about_axis((0.0, 1.0, 0.0), rng.uniform(-0.12, 0.12)))
        poses.append(RigidTransform(rot, center))
    return poses


def simulate_marker_captures(rig, poses: list[RigidTransform],
                             noise_sigma: float, seed: int,
                             edge_length: float = 30.0) -> CaptureSet:
    """Depth-render the cube at each pose from every rig camera."""
    cube = gen_cube(edge_length)
    bvh = build_bvh(cube)
    captures = CaptureSet(edge_length=edge_length)
    for pos_idx, pose in enumerate(poses):
        for cam in rig.cameras:
            cam_world = rig.world_pose(cam.id)
            camera = VirtualCamera(intrinsics=cam.intrinsics, pose=cam_world,
                                   noise_sigma=noise_sigma,
                                   seed=seed * 100003 + pos_idx * 1009 + cam.id)
            cloud = simulate_depth(bvh, camera, scene_pose=pose)
            if cloud.valid_count >= 300:
                captures.add(pos_idx, cam.id, cloud)
    return captures


@dataclass(frozen=True)
class CalibrationTrialRow:
    noise_sigma: float
    seed: int
    camera_id: int
    rotation_err_deg: float
    translation_err_cm: float


@dataclass(frozen=True)
class CalibrationReport:
    rows: tuple[CalibrationTrialRow, ...]
    preset: str
    positions: int

    def worst(self) -> tuple[float, float]:
        return (max(r.rotation_err_deg for r in self.rows),
                max(r.translation_err_cm for r in self.rows))

    def median_translation_err(self) -> float:
        return float(np.median([r.translation_err_cm for r in self.rows]))


def run_calibration_trial(preset: str = "8cam", positions: int = 6,
                          noise_sigmas: list[float] = (0.0,),
                          seeds: list[int] = (0,)) -> CalibrationReport:
    """Simulate marker captures, calibrate, and score against truth."""
    if positions < 3:
        raise InsufficientCorrespondence(
            f"need at least 3 marker positions, got {positions}")
    rig = rig_preset(preset)
    topology = {c.id: (c.row, c.mast) for c in rig.cameras}
    intrinsics = {c.id: c.intrinsics for c in rig.cameras}
    rows = []
    for sigma in noise_sigmas:
        for seed in seeds:
            poses = marker_poses(positions, seed=seed)
            captures = simulate_marker_captures(rig, poses, sigma, seed)
            result = calibrate_rig(captures, topology, intrinsics, seed=seed)
            for cam in rig.cameras:
                est = result.camera(cam.id).extrinsic
                true = cam.extrinsic
                rows.append(CalibrationTrialRow(
                    noise_sigma=sigma, seed=seed, camera_id=cam.id,
                    rotation_err_deg=rotation_angle_deg(est.rotation,
                                                        true.rotation),
                    translation_err_cm=float(np.linalg.norm(
                        est.translation - true.translation))))
    return CalibrationReport(rows=tuple(rows), preset=preset,
                             positions=positions)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def report_to_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.rows:
        writer.writerow([_fmt(v) for v in (
            r.shape, r.ray_count,
            r.perimeter_est, r.perimeter_true, r.rel_err("perimeter"),
            r.area_est, r.area_true, r.rel_err("area"),
            r.volume_est, r.volume_true, r.rel_err("volume"))])
    return buf.getvalue()


def report_to_json(report: BenchmarkReport) -> str:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "seed": report.seed,
        "slice_h": report.slice_h,
        "rows": [
            {"shape": r.shape, "ray_count": r.ray_count,
             "perimeter_est": r.perimeter_est,
             "perimeter_true": r.perimeter_true,
             "area_est": r.area_est, "area_true": r.area_true,
             "volume_est": r.volume_est, "volume_true": r.volume_true}
            for r in report.rows
        ],
        "summary": {str(rc): errs for rc, errs in report.summary().items()},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> BenchmarkReport:
    doc = json.loads(text)
    rows = tuple(BenchmarkRow(**{k: row[k] for k in (
        "shape", "ray_count", "perimeter_est", "perimeter_true",
        "area_est", "area_true", "volume_est", "volume_true")})
        for row in doc["rows"])
    return BenchmarkReport(rows=rows, seed=doc["seed"], slice_h=doc["slice_h"])


def emit_report(report: BenchmarkReport, path, format: str = "csv") -> None:
    """Write a report; identical reports produce byte-identical files."""
    fmt = format.lower()
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise InvalidParam(f"unknown report format {format!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(str(exc)) from exc
