import numpy as np
import pytest

from girthkit.cloud import (Intrinsics, PointCloud, bilateral_filter,
                            estimate_normals, load_cloud, load_depth_grid,
                            median_filter, save_cloud, save_depth_grid,
                            sor_filter, truncate_depth)
from girthkit.errors import InvalidParam, NotOrganized


def _grid_cloud(depth, intr=None):
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    intr = intr or Intrinsics(fx=100.0, fy=100.0, cx=(w - 1) / 2,
                              cy=(h - 1) / 2, width=w, height=h)
    valid = np.isfinite(depth)
    pts = intr.pixel_dirs().reshape(-1, 3) * np.nan_to_num(depth).ravel()[:, None]
    return PointCloud(points=pts, valid=valid.ravel(), width=w, height=h,
                      intrinsics=intr)


def test_truncate_depth():
    cloud = PointCloud(points=[[0, 0, 80.0], [0, 0, 200.0]])
    out = truncate_depth(cloud, 150.0)
    assert len(out.points) == 1
    assert out.points[0, 2] == 80.0
    with pytest.raises(InvalidParam):
        truncate_depth(cloud, 0.0)


def test_truncate_organized_preserves_grid():
    cloud = _grid_cloud(np.array([[80.0, 200.0], [90.0, 90.0]]))
    out = truncate_depth(cloud, 150.0)
    assert out.organized and out.width == 2 and out.height == 2
    assert out.valid.tolist() == [True, False, True, True]


def test_truncate_all_beyond():
    cloud = _grid_cloud(np.full((3, 3), 500.0))
    out = truncate_depth(cloud, 100.0)
    assert out.valid_count == 0


def test_median_constant_unchanged():
    cloud = _grid_cloud(np.full((8, 8), 100.0))
    out = median_filter(cloud, window=3)
    np.testing.assert_allclose(out.depths()[out.valid], 100.0)


def test_median_removes_salt_pixel():
    depth = np.full((9, 9), 100.0)
    depth[4, 4] = 500.0
    out = median_filter(_grid_cloud(depth), window=3)
    assert abs(out.depths().reshape(9, 9)[4, 4] - 100.0) < 1e-9


def test_median_rejects_even_window_and_unorganized():
    cloud = _grid_cloud(np.full((4, 4), 100.0))
    with pytest.raises(InvalidParam):
        median_filter(cloud, window=4)
    with pytest.raises(NotOrganized):
        median_filter(cloud.unorganized(), window=3)


def test_median_contraction():
    rng = np.random.default_rng(5)
    depth = 100.0 + rng.normal(0, 1.0, (16, 16))
    cloud = _grid_cloud(depth)
    once = median_filter(cloud, window=3)
    twice = median_filter(once, window=3)
    d0, d1, d2 = cloud.depths(), once.depths(), twice.depths()
    assert np.abs(d2 - d1).max() <= np.abs(d1 - d0).max() + 1e-12


def test_bilateral_constant_unchanged():
    cloud = _grid_cloud(np.full((10, 10), 123.0))
    out = bilateral_filter(cloud, sigma_s=2.0, sigma_r=1.0)
    assert np.abs(out.depths()[out.valid] - 123.0).max() < 1e-9


def test_bilateral_preserves_step_edge():
    depth = np.full((10, 20), 100.0)
    depth[:, 10:] = 200.0
    out = bilateral_filter(_grid_cloud(depth), sigma_s=2.0, sigma_r=1.0)
    d = out.depths().reshape(10, 20)
    assert np.abs(d[:, :10] - 100.0).max() < 0.1
    assert np.abs(d[:, 10:] - 200.0).max() < 0.1


def test_bilateral_reduces_noise_rms():
    rng = np.random.default_rng(11)
    noise = rng.normal(0, 0.5, (30, 30))
    out = bilateral_filter(_grid_cloud(100.0 + noise), sigma_s=2.0,
                           sigma_r=2.0)
    resid = out.depths().reshape(30, 30) - 100.0
    assert np.sqrt((resid ** 2).mean()) < np.sqrt((noise ** 2).mean())


def test_filters_move_points_only_along_pixel_rays():
    rng = np.random.default_rng(2)
    cloud = _grid_cloud(100.0 + rng.normal(0, 0.5, (12, 12)))
    for out in (median_filter(cloud, 3), bilateral_filter(cloud, 1.5, 1.0)):
        p_in = cloud.points[cloud.valid]
        p_out = out.points[out.valid]
        cross = np.cross(p_in, p_out)  # rays pass through the origin
        assert np.abs(cross).max() < 1e-9 * 100.0


def test_sor_removes_outliers():
    rng = np.random.default_rng(4)
    plane = np.column_stack([rng.uniform(-50, 50, (1000, 2)),
                             rng.normal(0, 0.1, 1000)])
    outliers = rng.uniform(90, 110, (10, 3))
    cloud = PointCloud(points=np.vstack([plane, outliers]))
    out = sor_filter(cloud, k=50, stddev_mult=1.0)
    kept = {tuple(p) for p in out.points}
    assert all(tuple(o) not in kept for o in outliers)
    plane_kept = sum(tuple(p) in kept for p in plane)
    assert plane_kept >= 990


def test_sor_uniform_lattice_keeps_all():
    # with k=2 every lattice point (corners included) has two neighbors at
    # distance 1, so the mean-distance statistic has zero variance
    g = np.arange(10, dtype=np.float64)
    pts = np.array([[x, y, 0.0] for x in g for y in g])
    out = sor_filter(PointCloud(points=pts), k=2, stddev_mult=1.0)
    assert len(out.points) == 100


def test_sor_k_too_large():
    cloud = PointCloud(points=np.random.default_rng(0).normal(size=(20, 3)))
    with pytest.raises(InvalidParam):
        sor_filter(cloud, k=20)


def test_normals_plane():
    rng = np.random.default_rng(6)
    pts = np.column_stack([rng.uniform(-10, 10, (500, 2)), np.zeros(500)])
    cloud = PointCloud(points=pts)
    out = estimate_normals(cloud, k=10, viewpoint=(0, 0, 100.0))
    ang = np.arccos(np.clip(out.normals @ [0, 0, 1.0], -1, 1))
    assert ang.max() < 1e-3


def test_normals_sphere_radial():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(50_000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    cloud = PointCloud(points=10.0 * v)
    out = estimate_normals(cloud, k=20, viewpoint=(0, 0, 0))
    inward = -v
    ang = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", out.normals,
                                                 inward), -1, 1)))
    assert ang.max() < 2.0


def test_normals_orientation_and_unit_length():
    rng = np.random.default_rng(8)
    pts = rng.uniform(-5, 5, (300, 3))
    vp = np.array([0.0, 0.0, 50.0])
    out = estimate_normals(PointCloud(points=pts), k=8, viewpoint=vp)
    lens = np.linalg.norm(out.normals, axis=1)
    assert np.abs(lens - 1).max() < 1e-6
    dots = np.einsum("ij,ij->i", out.normals, vp - out.points)
    assert (dots >= -1e-9).all()


def test_normals_collinear_low_confidence():
    line = np.column_stack([np.linspace(0, 10, 50), np.zeros(50),
                            np.zeros(50)])
    out = estimate_normals(PointCloud(points=line), k=5,
                           viewpoint=(0, 0, 10.0))
    assert out.normals_low_confidence.all()
    assert np.abs(np.linalg.norm(out.normals, axis=1) - 1).max() < 1e-6


def test_cloud_ply_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    pts = rng.uniform(-10, 10, (100, 3))
    n = rng.normal(size=(100, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    cloud = PointCloud(points=pts, normals=n)
    p = tmp_path / "c.ply"
    save_cloud(cloud, p)
    back = load_cloud(p)
    np.testing.assert_allclose(back.points, pts, atol=1e-4)
    np.testing.assert_allclose(back.normals, n, atol=1e-4)


def test_depth_grid_roundtrip(tmp_path):
    depth = np.full((6, 8), 90.0)
    depth[0, 0] = np.nan
    cloud = _grid_cloud(depth)
    p = tmp_path / "g.dg"
    save_depth_grid(cloud, p)
    back = load_depth_grid(p)
    assert back.width == 8 and back.height == 6
    assert back.valid.sum() == 47
    np.testing.assert_allclose(back.points[back.valid],
                               cloud.points[cloud.valid], atol=1e-3)
    assert back.intrinsics == cloud.intrinsics
