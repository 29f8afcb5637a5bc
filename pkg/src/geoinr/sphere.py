"""Geometry primitives on the unit sphere.

Coordinates are colatitude/longitude in radians: ``theta`` runs from 0 at
the north pole to pi at the south pole, ``phi`` is longitude in [0, 2*pi).
Rotations use the Z-Y-Z Euler convention throughout; no other convention
is supported. All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
EARTH_RADIUS_KM = 6371.0


class PoleSingularityError(ValueError):
    """Raised when an operation is evaluated at a projection singularity."""


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere: colatitude ``theta``, longitude ``phi``.

    ``phi`` is normalized modulo 2*pi at construction; ``theta`` outside
    [0, pi] is rejected.
    """

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta) or theta < 0.0 or theta > math.pi:
            raise ValueError(f"colatitude must lie in [0, pi], got {self.theta!r}")
        phi = float(self.phi)
        if not math.isfinite(phi):
            raise ValueError(f"longitude must be finite, got {self.phi!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi % (2.0 * math.pi))

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float) -> "SpherePoint":
        return cls(math.radians(90.0 - lat_deg), math.radians(lon_deg))

    @property
    def lat_deg(self) -> float:
        return 90.0 - math.degrees(self.theta)

    @property
    def lon_deg(self) -> float:
        """Longitude in degrees, wrapped to [-180, 180)."""
        lon = math.degrees(self.phi)
        return (lon + 180.0) % 360.0 - 180.0

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )

    @classmethod
    def from_unit_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("zero vector has no direction")
        v = v / norm
        theta = math.acos(min(1.0, max(-1.0, float(v[2]))))
        phi = math.atan2(float(v[1]), float(v[0]))
        return cls(theta, phi)


@dataclass(frozen=True)
class EulerRotation:
    """Z-Y-Z Euler rotation: R = Rz(alpha) @ Ry(beta) @ Rz(gamma)."""

    alpha: float
    beta: float
    gamma: float

    def matrix(self) -> np.ndarray:
        return _rz(self.alpha) @ _ry(self.beta) @ _rz(self.gamma)

    def inverse(self) -> "EulerRotation":
        return EulerRotation(-self.gamma, -self.beta, -self.alpha)


@dataclass(frozen=True)
class Dilation:
    """Stereographic dilation by scale factor ``a``; a = 1 is the identity."""

    a: float

    def __post_init__(self):
        if not (self.a > 0.0) or not math.isfinite(self.a):
            raise ValueError(f"dilation scale must be positive, got {self.a!r}")


def _rz(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def compose(r1: EulerRotation, r2: EulerRotation) -> EulerRotation:
    """Rotation equivalent to applying ``r2`` first, then ``r1``."""
    m = r1.matrix() @ r2.matrix()
    return euler_from_matrix(m)


def euler_from_matrix(m: np.ndarray) -> EulerRotation:
    """Recover Z-Y-Z angles from an orthogonal matrix with det +1."""
    # sin(beta) from the off-diagonal column keeps tiny rotations exact,
    # where acos(m[2,2]) would round them away
    sin_beta = math.hypot(float(m[0, 2]), float(m[1, 2]))
    beta = math.atan2(sin_beta, float(m[2, 2]))
    if sin_beta < 1e-14:
        # Gimbal-locked: only alpha + gamma (or alpha - gamma) is determined.
        alpha = math.atan2(float(m[1, 0]), float(m[0, 0]))
        gamma = 0.0
        if m[2, 2] < 0.0:
            alpha = -alpha
    else:
        alpha = math.atan2(float(m[1, 2]), float(m[0, 2]))
        gamma = math.atan2(float(m[2, 1]), -float(m[2, 0]))
    return EulerRotation(alpha, beta, gamma)


def rotate(p: SpherePoint, r: EulerRotation) -> SpherePoint:
    """Image of ``p`` under the rotation ``r``, renormalized to unit length."""
    v = r.matrix() @ p.unit_vector()
    return SpherePoint.from_unit_vector(v)


def fibonacci_lattice(n: int) -> list[SpherePoint]:
    """Deterministic near-uniform arrangement of ``n`` points on the sphere.

    Point i sits at z = 1 - (2*i + 1)/n and phi = (2*pi*i / golden_ratio)
    mod 2*pi. The midpoint offset keeps points away from the exact poles.
    """
    theta, phi = fibonacci_lattice_arrays(n)
    return [SpherePoint(float(t), float(p)) for t, p in zip(theta, phi)]


def fibonacci_lattice_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`fibonacci_lattice`; returns (theta, phi) arrays."""
    if int(n) != n or n < 1:
        raise ValueError(f"lattice size must be a positive integer, got {n!r}")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = (2.0 * math.pi * i / GOLDEN_RATIO) % (2.0 * math.pi)
    return theta, phi


def dilation_cocycle(a: float, theta) -> np.ndarray:
    """Cocycle lambda(a, theta) = 4a^2 / ((a^2-1)cos(theta) + (a^2+1))^2."""
    cos_t = np.cos(theta)
    denom = (a * a - 1.0) * cos_t + (a * a + 1.0)
    return 4.0 * a * a / (denom * denom)


def stereographic_dilate(theta: float, a: float) -> tuple[float, float]:
    """Dilate colatitude ``theta`` through the stereographic plane.

    Returns ``(theta_dilated, cocycle_sqrt)`` where
    tan(theta_dilated / 2) = a * tan(theta / 2) and the second element is
    lambda(a, theta) ** 0.5. theta = pi is excluded (projection singularity).
    """
    if not (a > 0.0) or not math.isfinite(a):
        raise ValueError(f"dilation scale must be positive, got {a!r}")
    if theta < 0.0:
        raise ValueError(f"colatitude must be nonnegative, got {theta!r}")
    if theta >= math.pi:
        raise PoleSingularityError(
            f"stereographic dilation undefined at theta >= pi (got {theta!r})"
        )
    theta_d = 2.0 * math.atan(a * math.tan(theta / 2.0))
    return theta_d, float(math.sqrt(dilation_cocycle(a, theta)))


def great_circle_distance(
    p: SpherePoint, q: SpherePoint, radius_km: float = EARTH_RADIUS_KM
) -> float:
    """Haversine distance in km between two points on a sphere of ``radius_km``."""
    if not (radius_km > 0.0):
        raise ValueError(f"radius must be positive, got {radius_km!r}")
    lat1, lat2 = math.pi / 2.0 - p.theta, math.pi / 2.0 - q.theta
    dlat = lat2 - lat1
    dlon = q.phi - p.phi
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * radius_km * math.asin(min(1.0, math.sqrt(h)))


def cell_area_km2(
    lat_deg: float, resolution_deg: float, radius_km: float = EARTH_RADIUS_KM
) -> float:
    """Area of an equirectangular grid cell centered at ``lat_deg``.

    R^2 * d^2 * cos(lat) with d the resolution in radians; zero at the poles.
    """
    lat = np.asarray(lat_deg, dtype=float)
    if np.any(np.abs(lat) > 90.0):
        raise ValueError(f"latitude must lie in [-90, 90], got {lat_deg!r}")
    if not (resolution_deg > 0.0):
        raise ValueError(f"resolution must be positive, got {resolution_deg!r}")
    if not (radius_km > 0.0):
        raise ValueError(f"radius must be positive, got {radius_km!r}")
    d = math.radians(resolution_deg)
    area = radius_km * radius_km * d * d * np.cos(np.radians(lat))
    # cos can go epsilon-negative at |lat| = 90
    area = np.maximum(area, 0.0)
    return float(area) if np.isscalar(lat_deg) else area


def unit_vectors(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """(n, 3) array of unit vectors for colatitude/longitude arrays."""
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def angles_from_vectors(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`unit_vectors`; input is renormalized first."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    v = v / norm
    theta = np.arccos(np.clip(v[..., 2], -1.0, 1.0))
    phi = np.arctan2(v[..., 1], v[..., 0]) % (2.0 * math.pi)
    return theta, phi
