"""Angular-radial coordinate systems based on the L1 and L2 norms.

The angle ``q`` lives on the periodic interval (-2, 2], scaled so that one
unit of ``q`` corresponds to a quarter turn regardless of the norm.  ``q = 0``
points along the positive x axis and ``q`` increases counter-clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

ANGLE_PERIOD = 4.0
_ON_CIRCLE_TOL = 1e-9


class CoordinateSystem(str, Enum):
    """Norm used for the radius: L1 (diamond) or L2 (circle)."""

    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value) -> "CoordinateSystem":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown coordinate system {value!r}; expected 'l1' or 'l2'")


@dataclass(frozen=True)
class PolarSample:
    """Paired radius/angle observations under a fixed coordinate system."""

    r: np.ndarray
    q: np.ndarray
    system: CoordinateSystem

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.r.shape != self.q.shape:
            raise ValueError("radius and angle arrays must have matching shapes")

    def __len__(self) -> int:
        return self.r.size


def wrap_angle(q):
    """Map angles into the principal interval (-2, 2]."""
    q = np.asarray(q, dtype=float)
    wrapped = -np.mod(-q + 2.0, ANGLE_PERIOD) + 2.0  # (-2, 2], endpoint kept at +2
    return wrapped if wrapped.ndim else float(wrapped)


def norm(system: CoordinateSystem, x, y):
    """Radius of (x, y) under the system's norm."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if system is CoordinateSystem.L1:
        return np.abs(x) + np.abs(y)
    return np.hypot(x, y)


def angular_fn(system: CoordinateSystem, u, v):
    """Scaled counter-clockwise arc position of a unit-circle point (u, v).

    The input must satisfy ``|u|^p + |v|^p = 1`` for the system's norm order
    ``p``.  The return value is the arc distance from (1, 0) measured
    counter-clockwise and rescaled to (-2, 2].
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    off = np.abs(norm(system, u, v) - 1.0)
    if np.any(off > _ON_CIRCLE_TOL):
        raise ValueError("point is not on the unit circle of the chosen norm")
    if system is CoordinateSystem.L1:
        eps = np.where(v >= 0.0, 1.0, -1.0)
        q = eps * (1.0 - u)
    else:
        q = (2.0 / np.pi) * np.arctan2(v, u)
    return wrap_angle(q)


def to_polar(system: CoordinateSystem, x, y) -> tuple:
    """Map Cartesian points to (radius, angle); the origin is excluded."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = norm(system, x, y)
    if np.any(r == 0.0):
        raise ValueError("the origin has no angular-radial representation")
    q = angular_fn(system, x / r, y / r)
    if r.ndim:
        return r, q
    return float(r), float(q)


def unit_vector(system: CoordinateSystem, q) -> tuple:
    """Inverse angular function: the unit-circle point at arc position q."""
    q = np.asarray(wrap_angle(q), dtype=float)
    if system is CoordinateSystem.L2:
        theta = q * (np.pi / 2.0)
        u, v = np.cos(theta), np.sin(theta)
    else:
        # piecewise linear over the four unit sub-intervals of q
        u = np.where(q >= 0.0, 1.0 - q, 1.0 + q)
        v = np.where(
            q >= 1.0, 2.0 - q, np.where(q >= -1.0, q, -2.0 - q)
        )
    if u.ndim:
        return u, v
    return float(u), float(v)


def from_polar(system: CoordinateSystem, r, q) -> tuple:
    """Map (radius, angle) back to Cartesian coordinates."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("radius must be positive")
    u, v = unit_vector(system, q)
    x, y = r * u, r * v
    if np.asarray(x).ndim:
        return x, y
    return float(x), float(y)


def jacobian(system: CoordinateSystem, r):
    """Jacobian J(r) relating densities: f_{R,Q}(r, q) = J(r) f_{X,Y}(x, y)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("radius must be positive")
    out = r if system is CoordinateSystem.L1 else (np.pi / 2.0) * r
    return out if out.ndim else float(out)


def polar_sample(system: CoordinateSystem, x, y) -> PolarSample:
    """Convenience wrapper building a PolarSample from Cartesian arrays."""
    r, q = to_polar(system, x, y)
    return PolarSample(r=np.atleast_1d(r), q=np.atleast_1d(q), system=system)
