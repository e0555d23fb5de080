"""Pinhole camera model: projection, back-projection, plane projection,
and uniform sampling of virtual view directions.

All lengths are in millimeters and all pixel coordinates in pixels.
Every function here is pure; the view sampler takes an explicit
``numpy.random.Generator`` so callers own all randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, InvalidInputError

_UNIT_TOL = 1e-9


def _as_unit(vec, name: str) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape != (3,):
        raise InvalidInputError(f"{name} must be a 3-vector, got shape {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise InvalidInputError(f"{name} must be a unit vector, |{name}| = {np.linalg.norm(v)!r}")
    return v


@dataclass(frozen=True)
class Camera:
    """Zero-skew pinhole intrinsics plus the optical-axis unit normal.

    ``normal`` is the direction against which depth comparisons and
    plane projections are taken; it defaults to the optical axis
    (0, 0, 1) in the camera frame.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        object.__setattr__(self, "normal", _as_unit(self.normal, "normal"))


@dataclass(frozen=True)
class ViewVector:
    """A unit view direction expressed in camera coordinates."""

    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "direction", _as_unit(self.direction, "direction"))


def back_project(camera: Camera, pixel_u: float, pixel_v: float, depth_abs: float) -> np.ndarray:
    """Lift a pixel and an absolute depth to a 3D camera-frame point.

    Returns ``(z*(u-cx)/fx, z*(v-cy)/fy, z)`` in millimeters. Projecting
    the result forward recovers ``(u, v)`` exactly.
    """
    if depth_abs <= 0:
        raise InvalidInputError(f"depth must be positive, got {depth_abs}")
    return np.array([
        depth_abs * (pixel_u - camera.cx) / camera.fx,
        depth_abs * (pixel_v - camera.cy) / camera.fy,
        depth_abs,
    ])


def project(camera: Camera, point) -> tuple[float, float]:
    """Project a camera-frame 3D point to pixel coordinates."""
    x, y, z = np.asarray(point, dtype=float)
    if z <= 0:
        raise BehindCameraError(f"cannot project point with depth {z} <= 0")
    return (camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy)


def project_to_plane(vec, normal) -> np.ndarray:
    """Remove from ``vec`` its component along the unit vector ``normal``."""
    v = np.asarray(vec, dtype=float)
    n = _as_unit(normal, "normal")
    return v - np.dot(v, n) * n


def sample_view(theta: float | None = None,
                u: float | None = None,
                rng: np.random.Generator | None = None) -> ViewVector:
    """Sample a view direction uniformly on the hemisphere facing the scene.

    The direction is ``(sqrt(1-u^2) cos(theta), sqrt(1-u^2) sin(theta), u)``
    with ``theta ~ U[0, 2*pi)`` and ``u ~ U[0, 1]``. Pass ``theta`` and
    ``u`` explicitly for a deterministic direction, or an ``rng`` to draw
    them; ``u`` in [0, 1] keeps the third component non-negative, so all
    sampled views face the same half-space as the camera normal.
    """
    if theta is None or u is None:
        if rng is None:
            raise InvalidInputError("either both theta and u, or an rng, must be given")
        theta = rng.uniform(0.0, 2.0 * np.pi)
        u = rng.uniform(0.0, 1.0)
    if not 0.0 <= u <= 1.0:
        raise InvalidInputError(f"u must lie in [0, 1], got {u}")
    if not 0.0 <= theta < 2.0 * np.pi:
        raise InvalidInputError(f"theta must lie in [0, 2*pi), got {theta}")
    r = np.sqrt(max(0.0, 1.0 - u * u))
    return ViewVector(np.array([r * np.cos(theta), r * np.sin(theta), u]))
