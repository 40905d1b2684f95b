import numpy as np
import pytest

from girthkit.bvh import (LEAF_SIZE, Bvh, build_bvh, raycast, raycast_batch,
                          raycast_brute)
from girthkit.errors import EmptyMesh, InvalidParam
from girthkit.mesh import TriangleMesh
from girthkit.synth import gen_cone, gen_cube, gen_cylinder, gen_sphere


def _random_rays(mesh, n, seed):
    rng = np.random.default_rng(seed)
    center, radius = mesh.bounding_sphere()
    origins = center + rng.normal(size=(n, 3)) * 2.0 * radius
    targets = center + rng.normal(size=(n, 3)) * 0.5 * radius
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


def _assert_equiv(mesh, n=1000, seed=0):
    bvh = build_bvh(mesh)
    origins, dirs = _random_rays(mesh, n, seed)
    t_max = 10.0 * mesh.bounding_sphere()[1] + 100.0
    t_b, tri_b = raycast_batch(bvh, origins, dirs, t_max)
    t_o, tri_o = raycast_brute(mesh, origins, dirs, t_max)
    np.testing.assert_array_equal(tri_b, tri_o)
    hit = tri_o >= 0
    if hit.any():
        rel = np.abs(t_b[hit] - t_o[hit]) / np.maximum(t_o[hit], 1e-30)
        assert rel.max() <= 1e-9


@pytest.mark.parametrize("mesh_fn", [
    lambda: gen_cube(15.0),
    lambda: gen_cylinder(25.0, 50.0, segments=256),
    lambda: gen_cone(25.0, 50.0, segments=128),
    lambda: gen_sphere(10.0, segments=64),
])
def test_bvh_equals_brute_force(mesh_fn):
    _assert_equiv(mesh_fn())


def test_single_triangle_single_leaf():
    mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    bvh = build_bvh(mesh)
    leaves = bvh.node_left < 0
    assert leaves.sum() == 1
    assert bvh.node_count[leaves].sum() == 1


def test_every_triangle_in_exactly_one_leaf(cyl_25_50):
    bvh = build_bvh(cyl_25_50)
    leaves = np.flatnonzero(bvh.node_left < 0)
    seen = []
    for i in leaves:
        s, c = bvh.node_start[i], bvh.node_count[i]
        assert c <= LEAF_SIZE
        seen.extend(bvh.tri_order[s:s + c])
    assert sorted(seen) == list(range(cyl_25_50.triangle_count))


def test_leaf_boxes_contain_triangles(cube15_bvh):
    bvh = cube15_bvh
    v = bvh.mesh.vertices
    for i in np.flatnonzero(bvh.node_left < 0):
        s, c = bvh.node_start[i], bvh.node_count[i]
        tris = bvh.mesh.triangles[bvh.tri_order[s:s + c]]
        pts = v[tris.ravel()]
        assert np.all(pts >= bvh.node_min[i] - 1e-9)
        assert np.all(pts <= bvh.node_max[i] + 1e-9)


def test_empty_mesh_rejected():
    mesh = TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    with pytest.raises(EmptyMesh):
        build_bvh(mesh)


def test_axis_aligned_hit(cube15_bvh):
    hit = raycast(cube15_bvh, (0, 0, -100), (0, 0, 1), 1000.0)
    assert hit is not None
    np.testing.assert_allclose(hit.point, [0, 0, -7.5], atol=1e-9)
    assert abs(hit.distance - 92.5) < 1e-9


def test_miss_returns_none(cube15_bvh):
    assert raycast(cube15_bvh, (0, 0, -100), (0, 0, -1), 1000.0) is None


def test_t_max_respected(cube15_bvh):
    assert raycast(cube15_bvh, (0, 0, -100), (0, 0, 1), 50.0) is None


def test_grazing_ray_matches_brute(cube15):
    # ray exactly in the z = 7.5 top-face plane
    bvh = build_bvh(cube15)
    origins = np.array([[-100.0, 0.0, 7.5]])
    dirs = np.array([[1.0, 0.0, 0.0]])
    t_b, tri_b = raycast_batch(bvh, origins, dirs, 1000.0)
    t_o, tri_o = raycast_brute(cube15, origins, dirs, 1000.0)
    np.testing.assert_array_equal(tri_b, tri_o)
    np.testing.assert_array_equal(t_b, t_o)


def test_non_unit_direction_rejected(cube15_bvh):
    with pytest.raises(InvalidParam):
        raycast(cube15_bvh, (0, 0, -100), (0, 0, 2), 1000.0)


def test_hit_point_on_triangle_plane(cyl_25_50_bvh):
    origins, dirs = _random_rays(cyl_25_50_bvh.mesh, 200, 7)
    for o, d in zip(origins[:50], dirs[:50]):
        hit = raycast(cyl_25_50_bvh, o, d, 1e4)
        if hit is None:
            continue
        tri = cyl_25_50_bvh.mesh.triangles[hit.triangle]
        a, b, c = cyl_25_50_bvh.mesh.vertices[tri]
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n)
        assert abs(np.dot(hit.point - a, n)) < 1e-6
        assert hit.distance >= 0
