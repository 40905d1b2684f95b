"""Section probes: perimeter, area and volume from orbiting coplanar rays.

A circle probe fires inward radial rays from its rim; the ordered hit
points form an inscribed polygon whose closed length is the perimeter and
whose center-pivot signed-triangle sum is the area. A cylinder probe
stacks circle sections at a preset slab height to integrate volume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bvh import Bvh, raycast_batch
from .errors import InvalidParam, NoSection
from .transforms import plane_basis, unit

AUTOFIT_RAYS = 64
AUTOFIT_MARGIN = 1.2
DEFAULT_RAY_COUNT = 10_000   # accuracy plateau of the orbit-ray method
DEFAULT_SLICE_H = 1.0        # cm


@dataclass(frozen=True)
class CircleProbe:
    """Measurement circle; radius None means auto-fit to the figure."""

    center: np.ndarray
    normal: np.ndarray
    radius: float | None = None
    ray_count: int = DEFAULT_RAY_COUNT

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=np.float64))
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            n = unit(n)
        object.__setattr__(self, "normal", n)
        if self.radius is not None and self.radius <= 0:
            raise InvalidParam("probe radius must be > 0")
        if self.ray_count < 8:
            raise InvalidParam("ray_count must be >= 8")

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.center],
                "normal": [float(v) for v in self.normal],
                "radius": None if self.radius is None else float(self.radius),
                "ray_count": self.ray_count}


@dataclass(frozen=True)
class CylinderProbe:
    """Volume probe: a base circle swept downward along its normal."""

    base: CircleProbe
    height: float
    h: float = DEFAULT_SLICE_H  # slab height per section

    def __post_init__(self):
        if self.height <= 0 or self.h <= 0:
            raise InvalidParam("height and h must be > 0")

    def to_dict(self) -> dict:
        return {**self.base.to_dict(), "height": float(self.height),
                "h": float(self.h)}


@dataclass(frozen=True)
class SectionMeasurement:
    perimeter: float           # cm
    area: float                # cm^2
    hits: np.ndarray           # (N, 3), in angular order
    rays_fired: int
    rays_missed: int

    def to_dict(self, probe: CircleProbe | None = None,
                include_hits: bool = False) -> dict:
        d = {"perimeter_cm": self.perimeter, "area_cm2": self.area,
             "rays_fired": self.rays_fired, "rays_missed": self.rays_missed}
        if probe is not None:
            d["probe"] = probe.to_dict()
        if include_hits:
            d["hits"] = [[float(v) for v in p] for p in self.hits]
        return d


@dataclass(frozen=True)
class VolumeMeasurement:
    volume: float                                # cm^3
    slice_areas: tuple[tuple[float, float], ...]  # (offset from top, cm^2)

    def to_dict(self) -> dict:
        return {"volume_cm3": self.volume,
                "slice_areas": [[o, a] for o, a in self.slice_areas]}


def probe_from_dict(d: dict, default_rays: int = DEFAULT_RAY_COUNT) -> CircleProbe:
    """Build a CircleProbe from a measure-request mapping.

    Accepts {center: [x,y,z], normal: [x,y,z], radius?: cm|"auto"|null,
    rays?: int}; raises InvalidParam on malformed fields.
    """
    try:
        center = [float(v) for v in d["center"]]
        normal = [float(v) for v in d["normal"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParam(f"probe needs numeric center and normal: {exc}") from exc
    if len(center) != 3 or len(normal) != 3:
        raise InvalidParam("center and normal must have 3 components")
    radius = d.get("radius")
    if isinstance(radius, str):
        if radius.lower() != "auto":
            raise InvalidParam(f"radius must be a number or 'auto', got {radius!r}")
        radius = None
    elif radius is not None:
        radius = float(radius)
    rays = d.get("rays", default_rays)
    if not isinstance(rays, int) or isinstance(rays, bool):
        try:
            rays = int(rays)
        except (TypeError, ValueError) as exc:
            raise InvalidParam(f"rays must be an integer: {exc}") from exc
    return CircleProbe(center=center, normal=normal, radius=radius,
                       ray_count=rays)


def autofit_radius(bvh: Bvh, center, normal) -> float:
    """Probe radius sized to the surrounding figure.

    64 in-plane rays are cast outward from the center; the radius is 1.2x
    the farthest hit, falling back to 1.2x the mesh bounding-sphere radius
    when fewer than 3 rays connect.
    """
    center = np.asarray(center, dtype=np.float64)
    normal = unit(normal)
    bs_center, bs_radius = bvh.mesh.bounding_sphere()
    t_max = 2.0 * bs_radius + np.linalg.norm(center - bs_center) + 1.0
    u, v = plane_basis(normal)
    th = 2.0 * np.pi * np.arange(AUTOFIT_RAYS) / AUTOFIT_RAYS
    dirs = np.cos(th)[:, None] * u + np.sin(th)[:, None] * v
    origins = np.broadcast_to(center, dirs.shape)
    t, tri = raycast_batch(bvh, np.ascontiguousarray(origins), dirs, t_max)
    hit = tri >= 0
    if hit.sum() >= 3:
        return AUTOFIT_MARGIN * float(t[hit].max())
    return AUTOFIT_MARGIN * bs_radius


def measure_section(bvh: Bvh, probe: CircleProbe) -> SectionMeasurement:
    """Measure the mesh section in the probe plane.

    Rays start on the probe circle and point at its center (coplanar,
    inward radial, reach 2R). Hits stay in angular order; misses are
    skipped and the polygon closes by wraparound.
    """
    radius = probe.radius
    if radius is None:
        radius = autofit_radius(bvh, probe.center, probe.normal)
    n = probe.ray_count
    u, v = plane_basis(probe.normal)
    th = 2.0 * np.pi * np.arange(n) / n
    radial = np.cos(th)[:, None] * u + np.sin(th)[:, None] * v
    origins = probe.center + radius * radial
    t, tri = raycast_batch(bvh, origins, -radial, 2.0 * radius)
    hit = tri >= 0
    n_hits = int(hit.sum())
    if n_hits < 3:
        raise NoSection(f"only {n_hits} of {n} rays hit the mesh")
    hits = origins[hit] - t[hit, None] * radial[hit]

    closed_diff = np.diff(hits, axis=0, append=hits[:1])
    perimeter = float(np.linalg.norm(closed_diff, axis=1).sum())

    # center-pivot signed triangles == shoelace in the (u, v) plane
    rel = hits - probe.center
    x = rel @ u
    y = rel @ v
    area = 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))
    return SectionMeasurement(perimeter=perimeter, area=area, hits=hits,
                              rays_fired=n, rays_missed=n - n_hits)


def measure_volume(bvh: Bvh, probe: CylinderProbe) -> VolumeMeasurement:
    """Integrate slab sections from the top circle downward.

    Slices sample slab midpoints ((i + 0.5) * h below the base circle);
    the final partial slab uses the remaining height. Slices that miss the
    mesh contribute zero area.
    """
    n_full = int(math.floor(probe.height / probe.h + 1e-12))
    rem = probe.height - n_full * probe.h
    if rem < 1e-9 * max(probe.h, 1.0):
        rem = 0.0
    slabs = [((i + 0.5) * probe.h, probe.h) for i in range(n_full)]
    if rem > 0.0:
        slabs.append((n_full * probe.h + rem / 2.0, rem))

    base = probe.base
    radius = base.radius
    if radius is None:
        radius = autofit_radius(bvh, base.center, base.normal)
    volume = 0.0
    slice_areas = []
    any_section = False
    for offset, thickness in slabs:
        circle = replace(base, center=base.center - offset * base.normal,
                         radius=radius)
        try:
            section = measure_section(bvh, circle)
            area = section.area
            any_section = True
        except NoSection:
            area = 0.0
        slice_areas.append((offset, area))
        volume += area * thickness
    if not any_section:
        raise NoSection("no slice of the cylinder probe intersects the mesh")
    return VolumeMeasurement(volume=volume, slice_areas=tuple(slice_areas))
