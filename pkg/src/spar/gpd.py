"""Generalized Pareto tail utilities shared by the fitting and model layers.

Parameterization: scale ``tau > 0`` and shape ``xi``; the survival function of
an excess ``x >= 0`` is ``(1 + xi x / tau)^(-1/xi)`` with the exponential
limit taken for ``|xi| < XI_ZERO_TOL``.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

XI_ZERO_TOL = 1e-6


def gp_sf(x, tau, xi):
    """GP survival probability of an excess; 0 beyond a finite upper endpoint."""
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("excess must be nonnegative")
    if np.any(tau <= 0.0):
        raise ValueError("scale must be positive")
    z = x / tau
    small = np.abs(xi) < XI_ZERO_TOL
    base = 1.0 + np.where(small, 0.0, xi) * z
    with np.errstate(divide="ignore", invalid="ignore"):
        heavy = np.where(base > 0.0, base, np.nan) ** (-1.0 / np.where(small, 1.0, xi))
    out = np.where(small, np.exp(-z), np.where(base > 0.0, heavy, 0.0))
    return out if out.ndim else float(out)


def gp_pdf(x, tau, xi):
    """GP density of an excess; 0 outside the support."""
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    z = x / tau
    small = np.abs(xi) < XI_ZERO_TOL
    base = 1.0 + np.where(small, 0.0, xi) * z
    with np.errstate(divide="ignore", invalid="ignore"):
        heavy = np.where(base > 0.0, base, np.nan) ** (-1.0 / np.where(small, 1.0, xi) - 1.0)
    out = np.where(small, np.exp(-z), np.where(base > 0.0, heavy, 0.0)) / tau
    out = np.where(x < 0.0, 0.0, out)
    return out if out.ndim else float(out)


def gp_quantile(level, tau, xi):
    """Excess at a conditional probability level in [0, 1).

    For ``xi < 0`` results are clamped at the finite upper endpoint
    ``-tau/xi`` (only reachable through floating-point overshoot).
    """
    level = np.asarray(level, dtype=float)
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any((level < 0.0) | (level >= 1.0)):
        raise ValueError("quantile level must lie in [0, 1)")
    small = np.abs(xi) < XI_ZERO_TOL
    xi_safe = np.where(small, 1.0, xi)
    out = np.where(
        small,
        -tau * np.log1p(-level),
        (tau / xi_safe) * np.expm1(-xi_safe * np.log1p(-level)),
    )
    endpoint = np.where(xi < -XI_ZERO_TOL, -tau / np.where(small, 1.0, xi), np.inf)
    out = np.minimum(out, endpoint)
    return out if out.ndim else float(out)


def gp_negloglik_stationary(params, excesses):
    """Negative log-likelihood of a constant-parameter GP fit.

    ``params = (log_tau, xi)``; returns +inf when an excess falls outside the
    support.
    """
    log_tau, xi = params
    tau = np.exp(log_tau)
    y = np.asarray(excesses, dtype=float)
    if abs(xi) < XI_ZERO_TOL:
        return y.size * log_tau + np.sum(y) / tau
    arg = 1.0 + xi * y / tau
    if np.any(arg <= 0.0):
        return np.inf
    return y.size * log_tau + (1.0 / xi + 1.0) * np.sum(np.log(arg))


def fit_gp_stationary(excesses, xi_start: float = 0.0) -> tuple:
    """Pooled maximum-likelihood (tau, xi) for iid GP excesses."""
    y = np.asarray(excesses, dtype=float)
    if y.size < 2:
        raise ValueError("need at least two excesses for a stationary GP fit")
    if np.any(y < 0.0):
        raise ValueError("excesses must be nonnegative")
    start = np.array([np.log(np.mean(y) + 1e-300), xi_start])
    if not np.isfinite(gp_negloglik_stationary(start, y)):
        start[1] = -0.1

    def objective(p):
        val = gp_negloglik_stationary(p, y)
        return val if np.isfinite(val) else 1e12 * (1.0 + abs(p[1]))

    res = minimize(objective, start, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 2000})
    log_tau, xi = res.x
    return float(np.exp(log_tau)), float(xi)


def gp_param_se(tau: float, xi: float, n_excess: int) -> tuple:
    """Asymptotic standard errors of the stationary GP MLE (valid xi > -0.5)."""
    if n_excess < 1:
        raise ValueError("need a positive exceedance count")
    c = (1.0 + xi) / n_excess
    return float(np.sqrt(2.0 * tau * tau * c)), float(np.sqrt((1.0 + xi) * c))
