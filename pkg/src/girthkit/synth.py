"""Ground-truth generators: parametric solids, a virtual depth camera and
rig layout presets.

Shapes are closed, outward-oriented meshes centered at the origin with +z
as their axis, paired with exact closed-form perimeter/area/volume
evaluators used as oracles by the benchmark harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bvh import Bvh, build_bvh, raycast_batch
from .calib import Camera, CameraRig
from .cloud import Intrinsics, PointCloud
from .errors import InvalidParam, UnknownPreset
from .mesh import TriangleMesh
from .transforms import RigidTransform, unit

DEFAULT_SEGMENTS = 512
DEFAULT_INTRINSICS = Intrinsics(fx=320.0, fy=320.0, cx=319.5, cy=239.5,
                                width=640, height=480)

SHAPE_KINDS = ("cube", "cylinder", "cone", "pyramid", "sphere")


@dataclass(frozen=True)
class ShapeSpec:
    """Parametric solid plus its analytic measurement oracles.

    Dimensions in cm: cube/pyramid use `size` (square side), curved shapes
    use `radius`; all but cube and sphere use `height`.
    """

    kind: str
    size: float = 0.0
    radius: float = 0.0
    height: float = 0.0
    segments: int = DEFAULT_SEGMENTS

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise InvalidParam(f"unknown shape kind {self.kind!r}")
        dims = self._dims()
        if any(d <= 0 for d in dims):
            raise InvalidParam(f"{self.kind} dimensions must be positive")
        if self.kind in ("cylinder", "cone", "sphere") and self.segments < 16:
            raise InvalidParam("curved shapes need at least 16 segments")

    def _dims(self):
        if self.kind == "cube":
            return (self.size,)
        if self.kind == "pyramid":
            return (self.size, self.height)
        if self.kind == "sphere":
            return (self.radius,)
        return (self.radius, self.height)

    @property
    def z_extent(self) -> tuple[float, float]:
        if self.kind == "cube":
            h = self.size
        elif self.kind == "sphere":
            h = 2 * self.radius
        else:
            h = self.height
        return (-h / 2.0, h / 2.0)

    def _cross_radius(self, z: float) -> float:
        """Circumscribed size parameter of the cross-section at height z."""
        lo, hi = self.z_extent
        if z < lo or z > hi:
            return 0.0
        if self.kind in ("cube", "cylinder"):
            return self.size if self.kind == "cube" else self.radius
        if self.kind == "sphere":
            return math.sqrt(max(self.radius ** 2 - z * z, 0.0))
        # cone / pyramid taper linearly from the base (lo) to the apex (hi)
        frac = (hi - z) / (hi - lo)
        return (self.radius if self.kind == "cone" else self.size) * frac

    def perimeter_at(self, z: float) -> float:
        r = self._cross_radius(z)
        if r == 0.0:
            return 0.0
        if self.kind in ("cube", "pyramid"):
            return 4.0 * r
        return 2.0 * math.pi * r

    def area_at(self, z: float) -> float:
        r = self._cross_radius(z)
        if self.kind in ("cube", "pyramid"):
            return r * r
        return math.pi * r * r

    def volume_between(self, z0: float, z1: float) -> float:
        lo, hi = self.z_extent
        a, b = max(min(z0, z1), lo), min(max(z0, z1), hi)
        if b <= a:
            return 0.0
        if self.kind == "cube":
            return self.size ** 2 * (b - a)
        if self.kind == "cylinder":
            return math.pi * self.radius ** 2 * (b - a)
        if self.kind == "sphere":
            f = lambda z: self.radius ** 2 * z - z ** 3 / 3.0
            return math.pi * (f(b) - f(a))
        # linear taper: area(z) = A_base * ((hi - z) / h)^2
        h = hi - lo
        base_area = self.area_at(lo)
        g = lambda z: -((hi - z) ** 3) / (3.0 * h * h)
        return base_area * (g(b) - g(a))

    def volume(self) -> float:
        return self.volume_between(*self.z_extent)

    @property
    def reference_height(self) -> float:
        """Mid-height, where the harness takes its section measurement."""
        lo, hi = self.z_extent
        return 0.5 * (lo + hi)

    def label(self) -> str:
        dims = "x".join(format(d, "g") for d in self._dims())
        return f"{self.kind}_{dims}"


def gen_shape(spec: ShapeSpec) -> TriangleMesh:
    """Tessellate the spec into a closed, outward-oriented mesh."""
    if spec.kind == "cube":
        return gen_cube(spec.size)
    if spec.kind == "cylinder":
        return gen_cylinder(spec.radius, spec.height, spec.segments)
    if spec.kind == "cone":
        return gen_cone(spec.radius, spec.height, spec.segments)
    if spec.kind == "pyramid":
        return gen_pyramid(spec.size, spec.height)
    return gen_sphere(spec.radius, spec.segments)


def gen_cube(side: float) -> TriangleMesh:
    if side <= 0:
        raise InvalidParam("side must be > 0")
    s = side / 2.0
    v = np.array([[x, y, z] for z in (-s, s) for y in (-s, s) for x in (-s, s)],
                 dtype=np.float64)
    # indices: bit0 = +x, bit1 = +y, bit2 = +z
    quads = [
        (0, 2, 3, 1),  # -z
        (4, 5, 7, 6),  # +z
        (0, 1, 5, 4),  # -y
        (2, 6, 7, 3),  # +y
        (0, 4, 6, 2),  # -x
        (1, 3, 7, 5),  # +x
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return TriangleMesh(v, np.asarray(tris))


def _ring(radius: float, z: float, segments: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(segments) / segments
    return np.stack([radius * np.cos(th), radius * np.sin(th),
                     np.full(segments, z)], axis=1)


def gen_cylinder(radius: float, height: float,
                 segments: int = DEFAULT_SEGMENTS) -> TriangleMesh:
    if radius <= 0 or height <= 0:
        raise InvalidParam("radius and height must be > 0")
    if segments < 16:
        raise InvalidParam("need at least 16 segments")
    n = segments
    bot = _ring(radius, -height / 2.0, n)
    top = _ring(radius, height / 2.0, n)
    centers = np.array([[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]])
    verts = np.vstack([bot, top, centers])
    cb, ct = 2 * n, 2 * n + 1
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))          # side, outward
        tris.append((i, n + j, n + i))
        tris.append((cb, j, i))             # bottom cap faces -z
        tris.append((ct, n + i, n + j))     # top cap faces +z
    return TriangleMesh(verts, np.asarray(tris))


def gen_cone(radius: float, height: float,
             segments: int = DEFAULT_SEGMENTS) -> TriangleMesh:
    if radius <= 0 or height <= 0:
        raise InvalidParam("radius and height must be > 0")
    if segments < 16:
        raise InvalidParam("need at least 16 segments")
    n = segments
    base = _ring(radius, -height / 2.0, n)
    apex = np.array([[0.0, 0.0, height / 2.0]])
    center = np.array([[0.0, 0.0, -height / 2.0]])
    verts = np.vstack([base, apex, center])
    ia, ic = n, n + 1
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, ia))
        tris.append((ic, j, i))
    return TriangleMesh(verts, np.asarray(tris))


def gen_pyramid(side: float, height: float) -> TriangleMesh:
    if side <= 0 or height <= 0:
        raise InvalidParam("side and height must be > 0")
    s = side / 2.0
    verts = np.array([
        [-s, -s, -height / 2.0], [s, -s, -height / 2.0],
        [s, s, -height / 2.0], [-s, s, -height / 2.0],
        [0.0, 0.0, height / 2.0],
    ])
    tris = np.array([
        (0, 2, 1), (0, 3, 2),               # base faces -z
        (0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4),
    ])
    return TriangleMesh(verts, tris)


def gen_sphere(radius: float, segments: int = DEFAULT_SEGMENTS) -> TriangleMesh:
    if radius <= 0:
        raise InvalidParam("radius must be > 0")
    if segments < 16:
        raise InvalidParam("need at least 16 segments")
    n = segments
    rings = max(n // 2, 3)
    verts = [np.array([0.0, 0.0, radius])]
    for r in range(1, rings):
        phi = np.pi * r / rings
        verts.append(_ring(radius * math.sin(phi), radius * math.cos(phi), n))
    verts.append(np.array([0.0, 0.0, -radius]))
    verts = np.vstack([np.atleast_2d(v) for v in verts])
    top, bottom = 0, len(verts) - 1
    ring_start = lambda r: 1 + (r - 1) * n
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((top, ring_start(1) + i, ring_start(1) + j))
        tris.append((bottom, ring_start(rings - 1) + j, ring_start(rings - 1) + i))
    for r in range(1, rings - 1):
        a, b = ring_start(r), ring_start(r + 1)
        for i in range(n):
            j = (i + 1) % n
            tris.append((a + i, b + i, b + j))
            tris.append((a + i, b + j, a + j))
    return TriangleMesh(verts, np.asarray(tris))


def mesh_volume(mesh: TriangleMesh) -> float:
    """Signed volume by the divergence theorem (positive when outward)."""
    tv = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->", tv[:, 0],
                           np.cross(tv[:, 1], tv[:, 2])) / 6.0)


# ---------------------------------------------------------------------------
# Virtual depth camera
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VirtualCamera:
    """Simulated pinhole depth sensor; pose maps camera frame to world."""

    intrinsics: Intrinsics = DEFAULT_INTRINSICS
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    noise_sigma: float = 0.0  # cm, Gaussian along the ray
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidParam("noise_sigma must be >= 0")


def simulate_depth(scene: TriangleMesh | Bvh, camera: VirtualCamera,
                   scene_pose: RigidTransform | None = None) -> PointCloud:
    """Render the scene into an organized camera-frame point cloud.

    Per-pixel: cast the pinhole ray, take the nearest hit, perturb the hit
    distance with seeded Gaussian noise, store depth (camera-frame z).
    Misses become invalid slots.
    """
    bvh = scene if isinstance(scene, Bvh) else build_bvh(scene)
    intr = camera.intrinsics
    dirs_cam = intr.pixel_dirs().reshape(-1, 3)
    norms = np.linalg.norm(dirs_cam, axis=1)
    dirs_unit = dirs_cam / norms[:, None]

    # cast in the scene's local frame to reuse the BVH across poses
    cam_to_scene = camera.pose if scene_pose is None else \
        scene_pose.inverse().compose(camera.pose)
    origins = np.broadcast_to(cam_to_scene.translation, dirs_unit.shape)
    dirs_scene = cam_to_scene.apply_vectors(dirs_unit)
    t, tri = raycast_batch(bvh, np.ascontiguousarray(origins),
                           np.ascontiguousarray(dirs_scene), 1e6)
    valid = tri >= 0
    t = np.where(valid, t, 0.0)
    if camera.noise_sigma > 0:
        rng = np.random.default_rng(camera.seed)
        t = t + camera.noise_sigma * rng.standard_normal(len(t)) * valid
    points = dirs_unit * t[:, None]
    return PointCloud(points=points, valid=valid,
                      width=intr.width, height=intr.height,
                      sensor_origin=np.zeros(3), intrinsics=intr)


def look_at_pose(position, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-world pose with +z toward target, +x right, +y down-ish."""
    position = np.asarray(position, dtype=np.float64)
    forward = unit(np.asarray(target, dtype=np.float64) - position)
    right = np.cross(forward, unit(up))
    nr = np.linalg.norm(right)
    if nr < 1e-12:
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / nr
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    return RigidTransform(rot, position)


# ---------------------------------------------------------------------------
# Rig presets
# ---------------------------------------------------------------------------

RIG_RADIUS = 90.0    # cm from the subject axis ("range of 0.8-1 m")
RIG_AIM_HEIGHT = 110.0  # cm, nominal subject center the cameras aim at

# camera id -> (height cm, mast index); masts sit at 90 deg azimuth spacing
_LAYOUT_13 = {
    1: (220.0, 0), 2: (220.0, 2),
    3: (180.0, 0), 4: (180.0, 1), 5: (180.0, 2), 6: (180.0, 3),
    7: (120.0, 0),
    8: (72.0, 1), 9: (72.0, 3),
    10: (41.0, 0), 11: (41.0, 1), 12: (41.0, 2), 13: (41.0, 3),
}
_ROW_OF_HEIGHT = {220.0: 0, 180.0: 1, 120.0: 2, 72.0: 3, 41.0: 4}


def rig_world_poses(name: str) -> dict[int, RigidTransform]:
    """Ground-truth camera-to-lab poses for a preset."""
    if name == "13cam":
        ids = sorted(_LAYOUT_13)
    elif name == "8cam":
        ids = [3, 4, 5, 6, 10, 11, 12, 13]
    else:
        raise UnknownPreset(f"unknown rig preset {name!r}")
    poses = {}
    for cam_id in ids:
        height, mast = _LAYOUT_13[cam_id]
        az = math.radians(90.0 * mast)
        pos = np.array([RIG_RADIUS * math.cos(az), RIG_RADIUS * math.sin(az),
                        height])
        poses[cam_id] = look_at_pose(pos, (0.0, 0.0, RIG_AIM_HEIGHT))
    return poses


def rig_preset(name: str, intrinsics: Intrinsics = DEFAULT_INTRINSICS) -> CameraRig:
    """Reference camera rig for a named preset; extrinsics are ground truth.

    The returned rig keeps the lab placement in `world`, so camera heights
    and the capture axis remain recoverable.
    """
    world_poses = rig_world_poses(name)
    ref_id = min(world_poses)
    ref_world = world_poses[ref_id]
    ref_inv = ref_world.inverse()
    cams = tuple(
        Camera(id=cam_id, row=_ROW_OF_HEIGHT[_LAYOUT_13[cam_id][0]],
               mast=_LAYOUT_13[cam_id][1], intrinsics=intrinsics,
               extrinsic=(RigidTransform.identity() if cam_id == ref_id
                          else ref_inv.compose(world_poses[cam_id])))
        for cam_id in sorted(world_poses))
    return CameraRig(cameras=cams, reference_id=ref_id, world=ref_world)
