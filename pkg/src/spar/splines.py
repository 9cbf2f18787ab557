"""Periodic cubic B-spline bases on (-2, 2] with a curvature penalty.

The basis wraps ordinary cubic B-splines around the circle: the knot vector
is extended periodically by one support width on each side and the first
three columns of the ordinary design are identified with the three trailing
ones.  Every basis function and its first two derivatives are continuous
across the wrap point, and the functions form a partition of unity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .coords import ANGLE_PERIOD, wrap_angle

_DEGREE = 3
_MIN_KNOTS = 4
# 4-point Gauss-Legendre: exact for the piecewise-polynomial curvature products
_GL_NODES = np.array([-0.8611363115940526, -0.3399810435848563,
                      0.3399810435848563, 0.8611363115940526])
_GL_WEIGHTS = np.array([0.3478548451374538, 0.6521451548625461,
                        0.6521451548625461, 0.3478548451374538])


def place_knots(angles, k: int) -> np.ndarray:
    """Knots at empirical angle quantiles for equally spaced levels j/k.

    Duplicate (or near-coincident) quantiles are dropped; if fewer than four
    distinct knots survive, falls back to equally spaced knots on (-2, 2].
    """
    if k < _MIN_KNOTS:
        raise ValueError(f"need at least {_MIN_KNOTS} knots")
    angles = wrap_angle(np.asarray(angles, dtype=float))
    if angles.size < k:
        raise ValueError("fewer observations than requested knots")
    levels = np.arange(1, k + 1) / k
    knots = np.unique(np.quantile(angles, levels))
    # guard against near-coincident quantiles that survive exact dedup
    keep = np.concatenate([[True], np.diff(knots) > 1e-9])
    knots = knots[keep]
    if knots.size < _MIN_KNOTS:
        return -2.0 + ANGLE_PERIOD * levels
    return knots


@dataclass
class CyclicSplineBasis:
    """Periodic cubic B-spline basis defined by its circular knot sequence."""

    knots: np.ndarray
    _spline: BSpline = field(init=False, repr=False)
    _penalty: np.ndarray | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size < _MIN_KNOTS:
            raise ValueError(f"need at least {_MIN_KNOTS} strictly increasing knots")
        if np.any(np.diff(knots) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        if knots[0] <= -2.0 or knots[-1] > 2.0:
            raise ValueError("knots must lie in (-2, 2]")
        self.knots = knots
        k = knots.size
        extended = np.concatenate([
            knots[-_DEGREE:] - ANGLE_PERIOD,
            knots,
            knots[:_DEGREE + 1] + ANGLE_PERIOD,
        ])
        m = extended.size - _DEGREE - 1  # == k + 3 ordinary B-splines
        self._spline = BSpline(extended, np.eye(m), _DEGREE, extrapolate=False)

    @property
    def k(self) -> int:
        return self.knots.size

    # spec alias
    @property
    def basis_dim(self) -> int:
        return self.k

    def _fold(self, q) -> np.ndarray:
        """Map angles into the fundamental domain [knots[0], knots[0] + 4)."""
        q = wrap_angle(np.asarray(q, dtype=float))
        return self.knots[0] + np.mod(q - self.knots[0], ANGLE_PERIOD)

    def _wrap_columns(self, ordinary: np.ndarray) -> np.ndarray:
        k = self.k
        out = np.array(ordinary[..., :k])
        out[..., :_DEGREE] += ordinary[..., k:k + _DEGREE]
        return out

    def design_matrix(self, q) -> np.ndarray:
        """Evaluate all k periodic basis functions; rows sum to one."""
        folded = np.atleast_1d(self._fold(q))
        return self._wrap_columns(self._spline(folded))

    def derivative_matrix(self, q, order: int = 1) -> np.ndarray:
        folded = np.atleast_1d(self._fold(q))
        return self._wrap_columns(self._spline.derivative(order)(folded))

    def penalty_matrix(self) -> np.ndarray:
        """S with b' S b = integral of the squared second derivative over a period."""
        if self._penalty is None:
            edges = np.concatenate([self.knots, [self.knots[0] + ANGLE_PERIOD]])
            nodes, weights = [], []
            for a, b in zip(edges[:-1], edges[1:]):
                nodes.append(0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES)
                weights.append(0.5 * (b - a) * _GL_WEIGHTS)
            x = np.concatenate(nodes)
            w = np.concatenate(weights)
            folded = self.knots[0] + np.mod(x - self.knots[0], ANGLE_PERIOD)
            d2 = self._wrap_columns(self._spline.derivative(2)(folded))
            penalty = (d2 * w[:, None]).T @ d2
            self._penalty = 0.5 * (penalty + penalty.T)
        return self._penalty


@dataclass
class SplineFunction:
    """Periodic spline g(q) = intercept + sum_j coeffs[j] B_j(q)."""

    basis: CyclicSplineBasis
    intercept: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.basis.k,):
            raise ValueError("coefficient length must match the basis dimension")

    def __call__(self, q):
        out = self.intercept + self.basis.design_matrix(q) @ self.coeffs
        return out if np.ndim(q) else float(out[0])

    def derivative(self, q, order: int = 1):
        out = self.basis.derivative_matrix(q, order) @ self.coeffs
        return out if np.ndim(q) else float(out[0])

    def roughness(self) -> float:
        """Integrated squared second derivative."""
        return float(self.coeffs @ self.basis.penalty_matrix() @ self.coeffs)


def constraint_transform(design: np.ndarray) -> np.ndarray:
    """Orthonormal basis Z of the sum-to-zero constraint for a fitted design.

    Centering the fitted spline against the observed design (1' D Z theta = 0
    for all theta) makes the separate intercept identifiable.  Built from a
    Householder reflection, so the result is deterministic.
    """
    c = design.mean(axis=0)
    k = c.size
    v = c.copy()
    v[0] += np.sign(c[0]) * np.linalg.norm(c) if c[0] != 0 else np.linalg.norm(c)
    H = np.eye(k) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:]
