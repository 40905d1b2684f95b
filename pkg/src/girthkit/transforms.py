"""Rigid transforms and small vector helpers shared across modules."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParam

ORTHO_TOL = 1e-9


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise InvalidParam("zero-length vector")
    return v / n


def plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal (u, v) spanning the plane of `normal`."""
    n = np.asarray(normal, dtype=np.float64)
    if abs(n[0]) <= abs(n[1]) and abs(n[0]) <= abs(n[2]):
        helper = np.array([1.0, 0.0, 0.0])
    elif abs(n[1]) <= abs(n[2]):
        helper = np.array([0.0, 1.0, 0.0])
    else:
        helper = np.array([0.0, 0.0, 1.0])
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation about a unit axis."""
    a = unit(axis)
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    x, y, z = a
    cross = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=np.float64)
    return c * np.eye(3) + s * cross + (1 - c) * np.outer(a, a)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: x -> R @ x + t. Lengths in cm."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.rotation, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.translation, dtype=np.float64))
        if r.shape != (3, 3) or t.shape != (3,):
            raise InvalidParam("rotation must be 3x3 and translation length 3")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHO_TOL:
            raise InvalidParam("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise InvalidParam("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def apply_vectors(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Returns self ∘ other (apply `other` first)."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def almost_equal(self, other: "RigidTransform", rot_tol=1e-9, trans_tol=1e-9) -> bool:
        return (np.linalg.norm(self.rotation - other.rotation) <= rot_tol
                and np.linalg.norm(self.translation - other.translation) <= trans_tol)

    def to_dict(self) -> dict:
        return {"rotation": [float(v) for v in self.rotation.ravel()],
                "translation_cm": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
                   np.asarray(d["translation_cm"], dtype=np.float64))


def rotation_angle_deg(r_a: np.ndarray, r_b: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees."""
    r = np.asarray(r_a) @ np.asarray(r_b).T
    c = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))
