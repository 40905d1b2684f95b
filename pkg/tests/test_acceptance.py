"""Acceptance suite: one pass/fail line per criterion.

Run with `pytest tests/test_acceptance.py -v` (lines print unbuffered even
under capture).
"""
import math
import time

import numpy as np
import pytest

from girthkit.bvh import build_bvh, raycast_batch, raycast_brute
from girthkit.calib import (CaptureSet, calibrate_rig, fit_cube_marker,
                            procrustes, ransac_align)
from girthkit.cloud import (PointCloud, bilateral_filter, estimate_normals,
                            median_filter, sor_filter, truncate_depth)
from girthkit.harness import (default_shape_suite, marker_poses,
                              run_measurement_sweep, report_to_csv,
                              report_to_json, simulate_marker_captures)
from girthkit.probes import CircleProbe, CylinderProbe, measure_section, \
    measure_volume
from girthkit.slicer import slice_mesh
from girthkit.synth import (DEFAULT_INTRINSICS, ShapeSpec, VirtualCamera,
                            gen_cube, gen_cylinder, gen_shape, rig_preset,
                            simulate_depth)
from girthkit.calib import fuse
from girthkit.transforms import (RigidTransform, rotation_about_axis,
                                 rotation_angle_deg)

from test_calib import cube_marker_cloud


@pytest.fixture
def check(capsys):
    def _check(criterion, description, ok, detail=""):
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            line = f"[criterion {criterion}] {status}: {description}"
            if detail:
                line += f" ({detail})"
            print(line, flush=True)
        assert ok, f"criterion {criterion} failed: {description} {detail}"
    return _check


@pytest.fixture(scope="module")
def suite_meshes():
    return [(spec, build_bvh(gen_shape(spec)))
            for spec in default_shape_suite()]


def _mid_perimeter_err(spec, bvh, rays):
    probe = CircleProbe(center=(0, 0, spec.reference_height),
                        normal=(0, 0, 1), ray_count=rays)
    m = measure_section(bvh, probe)
    true = spec.perimeter_at(spec.reference_height)
    return abs(m.perimeter - true) / true


def test_criterion_1_cube_convergence(check, cube15_bvh):
    t0 = time.perf_counter()
    probe = CircleProbe(center=(0, 0, 0), normal=(0, 0, 1), ray_count=10_000)
    section = measure_section(cube15_bvh, probe)
    base = CircleProbe(center=(0, 0, 7.5), normal=(0, 0, 1), radius=15.0,
                       ray_count=10_000)
    vol = measure_volume(cube15_bvh, CylinderProbe(base=base, height=15.0,
                                                   h=1.0))
    elapsed = time.perf_counter() - t0
    p_err = abs(section.perimeter - 60.00) / 60.00
    a_err = abs(section.area - 225.00) / 225.00
    v_err = abs(vol.volume - 3375.00) / 3375.00
    check(1, "cube-15 perimeter/area/volume at 10^4 rays within 0.5%",
          p_err <= 0.005 and a_err <= 0.005 and v_err <= 0.005
          and elapsed < 5.0,
          f"perimeter={section.perimeter:.4f} area={section.area:.4f} "
          f"volume={vol.volume:.2f} elapsed={elapsed:.2f}s")


def test_criterion_2_error_trend(check, suite_meshes):
    avg = {}
    for rays in (100, 1_000, 10_000, 100_000):
        errs = [_mid_perimeter_err(spec, bvh, rays)
                for spec, bvh in suite_meshes]
        avg[rays] = sum(errs) / len(errs)
    trend_ok = avg[1_000] < avg[100]
    plateau_ok = abs(avg[100_000] - avg[10_000]) < avg[10_000]
    check(2, "average perimeter error: 10^3 < 10^2 and plateau past 10^4",
          trend_ok and plateau_ok,
          "avg err " + " ".join(f"{k}:{v:.5f}" for k, v in avg.items()))


def test_criterion_3_error_scale(check, suite_meshes):
    errs = [_mid_perimeter_err(spec, bvh, 10_000)
            for spec, bvh in suite_meshes]
    avg = sum(errs) / len(errs)
    check(3, "average relative error at 10^4 rays <= 0.01", avg <= 0.01,
          f"avg={avg:.5f}")


def test_criterion_4_procrustes_ransac(check):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    src = rng.uniform(-20, 20, (14, 3))
    truth = RigidTransform(rotation_about_axis((1, -2, 0.5), 0.9),
                           np.array([3.0, -8.0, 12.0]))
    t = procrustes(src, truth.apply(src))
    exact_ok = (np.linalg.norm(t.rotation - truth.rotation) < 1e-9
                and np.linalg.norm(t.translation - truth.translation) < 1e-9)

    n_out = 6  # 6 of 20 = 30% outliers
    src2 = rng.uniform(-20, 20, (20, 3))
    dst2 = truth.apply(src2)
    dst2[-n_out:] = rng.uniform(-20, 20, (n_out, 3)) + 150.0
    rt, inliers = ransac_align(src2, dst2, inlier_threshold=1.0, seed=0)
    ransac_ok = (inliers.tolist() == list(range(14))
                 and np.linalg.norm(rt.translation - truth.translation) < 0.1
                 and rotation_angle_deg(rt.rotation, truth.rotation) < 0.1)
    elapsed = time.perf_counter() - t0
    check(4, "procrustes exact within 1e-9; RANSAC robust to 30% outliers",
          exact_ok and ransac_ok and elapsed < 1.0,
          f"elapsed={elapsed:.3f}s inliers={len(inliers)}/20")


def test_criterion_5_cube_marker_fit(check):
    rot = rotation_about_axis((0.4, 0.1, 1.0), 0.5)
    center = np.array([4.0, -6.0, 95.0])
    model = fit_cube_marker(cube_marker_cloud(center, rot))
    ortho = np.abs(model.normals @ model.normals.T - np.eye(3)).max()
    noiseless_ok = (ortho < 1e-6
                    and np.linalg.norm(model.center - center) < 1e-6)
    errs = []
    for seed in range(100):
        m = fit_cube_marker(cube_marker_cloud(center, rot, noise=0.2,
                                              seed=seed))
        errs.append(np.linalg.norm(m.center - center))
    median_err = float(np.median(errs))
    check(5, "cube marker: noiseless exact; sigma=0.2 median error < 0.2 cm",
          noiseless_ok and median_err < 0.2,
          f"ortho={ortho:.2e} median_err={median_err:.4f} cm")


def test_criterion_6_rig_calibration(check):
    t0 = time.perf_counter()
    rig = rig_preset("8cam")
    topology = {c.id: (c.row, c.mast) for c in rig.cameras}
    intrinsics = {c.id: c.intrinsics for c in rig.cameras}
    poses = marker_poses(6, seed=0)
    captures = simulate_marker_captures(rig, poses, noise_sigma=0.1, seed=0)
    result = calibrate_rig(captures, topology, intrinsics, seed=0)
    max_t = max(np.linalg.norm(result.camera(c.id).extrinsic.translation
                               - c.extrinsic.translation)
                for c in rig.cameras)
    max_r = max(rotation_angle_deg(result.camera(c.id).extrinsic.rotation,
                                   c.extrinsic.rotation)
                for c in rig.cameras)

    g = RigidTransform(rotation_about_axis((0.3, 1.0, -0.2), 0.7),
                       np.array([15.0, -5.0, 8.0]))
    moved = CaptureSet(edge_length=captures.edge_length)
    for pos, per_cam in captures.captures.items():
        for cam_id, cloud in per_cam.items():
            moved.add(pos, cam_id, PointCloud(
                points=g.apply(cloud.points), valid=cloud.valid,
                width=cloud.width, height=cloud.height,
                sensor_origin=g.apply(cloud.sensor_origin),
                intrinsics=cloud.intrinsics))
    alt = calibrate_rig(moved, topology, intrinsics, seed=0)
    gauge_err = max(
        max(np.linalg.norm(alt.camera(c.id).extrinsic.rotation
                           - g.compose(result.camera(c.id).extrinsic)
                           .compose(g.inverse()).rotation),
            np.linalg.norm(alt.camera(c.id).extrinsic.translation
                           - g.compose(result.camera(c.id).extrinsic)
                           .compose(g.inverse()).translation))
        for c in rig.cameras)
    elapsed = time.perf_counter() - t0
    check(6, "8cam rig at sigma=0.1 within 0.5 cm / 0.5 deg; gauge "
             "invariance within 1e-6; < 60 s",
          max_t < 0.5 and max_r < 0.5 and gauge_err < 1e-6 and elapsed < 60,
          f"max_t={max_t:.4f} cm max_r={max_r:.4f} deg "
          f"gauge={gauge_err:.2e} elapsed={elapsed:.1f}s")


def test_criterion_7_end_to_end_girth(check):
    t0 = time.perf_counter()
    rig = rig_preset("8cam")
    bvh = build_bvh(gen_cylinder(10.0, 60.0, segments=256))
    lift = RigidTransform(np.eye(3), [0.0, 0.0, 110.0])
    clouds = {}
    for cam in rig.cameras:
        vc = VirtualCamera(intrinsics=cam.intrinsics,
                           pose=rig.world_pose(cam.id), noise_sigma=0.1,
                           seed=cam.id)
        pc = simulate_depth(bvh, vc, scene_pose=lift)
        pc = truncate_depth(pc, 150.0)
        pc = median_filter(pc, 5)
        pc = bilateral_filter(pc, 3.0, 2.0)
        pc = sor_filter(pc, 50, 1.0)
        pc = estimate_normals(pc, 30)
        clouds[cam.id] = pc
    fused = fuse(clouds, rig)
    mesh = slice_mesh(fused, band_height=1.0)
    m = measure_section(build_bvh(mesh),
                        CircleProbe(center=(0, 0, 110.0), normal=(0, 0, 1),
                                    ray_count=10_000))
    true = 2 * math.pi * 10.0
    rel = abs(m.perimeter - true) / true
    elapsed = time.perf_counter() - t0
    check(7, "end-to-end cylinder phantom girth within 2% in < 2 min",
          rel < 0.02 and elapsed < 120,
          f"perimeter={m.perimeter:.3f} cm rel_err={rel:.4f} "
          f"elapsed={elapsed:.1f}s")


def test_criterion_8_oracle_equivalences(check, suite_meshes):
    rng = np.random.default_rng(123)
    bvh_ok = True
    for spec, bvh in suite_meshes:
        mesh = bvh.mesh
        center, radius = mesh.bounding_sphere()
        origins = center + rng.normal(size=(1000, 3)) * 2 * radius
        dirs = center + rng.normal(size=(1000, 3)) * 0.5 * radius - origins
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t_b, tri_b = raycast_batch(bvh, origins, dirs, 10 * radius + 100)
        t_o, tri_o = raycast_brute(mesh, origins, dirs, 10 * radius + 100)
        bvh_ok &= bool(np.array_equal(tri_b, tri_o)
                       and np.allclose(t_b, t_o, rtol=1e-9, atol=0))

    cam = VirtualCamera(intrinsics=DEFAULT_INTRINSICS,
                        pose=RigidTransform(np.eye(3),
                                            np.array([0.0, 0.0, -60.0])),
                        noise_sigma=0.0, seed=0)
    cube = gen_cube(15.0)
    cloud = simulate_depth(cube, cam)
    dirs_cam = DEFAULT_INTRINSICS.pixel_dirs().reshape(-1, 3)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    origins = np.broadcast_to(cam.pose.translation, dirs_cam.shape).copy()
    t, tri = raycast_brute(cube, origins, dirs_cam, 1e4)
    hit = tri >= 0
    depth_ok = bool(np.array_equal(cloud.valid, hit) and np.allclose(
        cloud.depths()[hit], t[hit] * dirs_cam[hit, 2], rtol=1e-12, atol=0))

    cyl = build_bvh(gen_cylinder(25.0, 50.0, segments=256))
    m = measure_section(cyl, CircleProbe(center=(1.0, 2.0, 5.0),
                                         normal=(0, 0, 1), ray_count=3000))
    x, y = m.hits[:, 0], m.hits[:, 1]
    shoelace = 0.5 * abs(np.dot(x, np.roll(y, -1))
                         - np.dot(np.roll(x, -1), y))
    area_ok = abs(m.area - shoelace) / shoelace < 1e-9

    check(8, "BVH==brute force, sigma=0 depth==raycast, area==shoelace",
          bvh_ok and depth_ok and area_ok,
          f"bvh={bvh_ok} depth={depth_ok} area={area_ok}")


def test_criterion_9_determinism(check):
    shapes = [ShapeSpec(kind="cube", size=15.0),
              ShapeSpec(kind="cylinder", radius=25.0, height=50.0,
                        segments=128)]
    a = run_measurement_sweep(shapes, [100, 1000], h=2.0, seed=7)
    b = run_measurement_sweep(shapes, [100, 1000], h=2.0, seed=7)
    csv_ok = report_to_csv(a) == report_to_csv(b)
    json_ok = report_to_json(a) == report_to_json(b)
    check(9, "identical config + seeds give byte-identical CSV/JSON reports",
          csv_ok and json_ok, f"csv={csv_ok} json={json_ok}")
