"""Local (windowed) stationary estimates and goodness-of-fit diagnostics.

Local estimates fit a stationary GP to the N nearest observations in
angular distance around each grid angle.  They act as a sanity check on the
smooth spline fits and help choose tuning parameters.  The module also
produces localized QQ data and the angular histogram used to judge the
kernel bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coords import PolarSample, wrap_angle
from .gpd import fit_gp_stationary, gp_quantile
from .model import SparFit

DEFAULT_GRID_POINTS = 200
DEFAULT_WINDOW_SIZE = 500
DEFAULT_QQ_CENTERS = (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)
MIN_WINDOW_EXCEEDANCES = 30


def angular_distance(a, b):
    """Circular distance on (-2, 2]: min(|a - b|, 4 - |a - b|)."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    out = np.minimum(d, 4.0 - d)
    return out if out.ndim else float(out)


def angle_grid(m: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Reference angles -2 + 4i/m for i = 1..m."""
    return -2.0 + 4.0 * np.arange(1, m + 1) / m


@dataclass(frozen=True)
class LocalEstimate:
    """Stationary GP estimate from the N nearest-angle observations."""

    q: float
    u_local: float
    tau_local: float
    xi_local: float
    window_size: int
    n_exceedances: int
    reliable: bool


def nearest_window(q_data: np.ndarray, center: float, n_window: int) -> np.ndarray:
    """Indices of the N angularly closest observations; ties keep input order."""
    d = angular_distance(q_data, center)
    idx = np.argsort(d, kind="stable")[:n_window]
    return np.sort(idx)


def local_fit(sample: PolarSample, q_grid=None, n_window: int = DEFAULT_WINDOW_SIZE,
              gamma: float = 0.7) -> list[LocalEstimate]:
    """Windowed stationary threshold and GP estimates over a grid of angles."""
    if q_grid is None:
        q_grid = angle_grid()
    q_grid = np.atleast_1d(np.asarray(q_grid, dtype=float))
    if n_window > len(sample):
        raise ValueError("window size exceeds the sample size")
    out = []
    for center in q_grid:
        idx = nearest_window(sample.q, center, n_window)
        radii = sample.r[idx]
        u = float(np.quantile(radii, gamma))
        excess = radii[radii > u] - u
        reliable = excess.size >= MIN_WINDOW_EXCEEDANCES
        if excess.size >= 2:
            tau, xi = fit_gp_stationary(excess)
        else:
            tau, xi, reliable = np.nan, np.nan, False
        out.append(LocalEstimate(q=float(center), u_local=u, tau_local=tau,
                                 xi_local=xi, window_size=n_window,
                                 n_exceedances=int(excess.size), reliable=reliable))
    return out


def local_qq(sample: PolarSample, fit: SparFit, centers=DEFAULT_QQ_CENTERS,
             n_window: int = DEFAULT_WINDOW_SIZE, probs=None) -> dict:
    """Observed vs model radial quantiles in windows around the given centers.

    For each center q the window's threshold exceedances are treated as a
    sample from the conditional radial tail at q; their empirical quantiles
    are paired with u(q) + GP quantiles at the same levels.
    """
    if probs is None:
        probs = np.linspace(0.01, 0.99, 99)
    probs = np.asarray(probs, dtype=float)
    if sample.system is not fit.system:
        raise ValueError("sample and model use different coordinate systems")
    out = {}
    for center in np.atleast_1d(np.asarray(centers, dtype=float)):
        center = float(wrap_angle(center))
        idx = nearest_window(sample.q, center, n_window)
        u = float(fit.threshold_fn(center))
        excess = sample.r[idx] - fit.threshold_fn(sample.q[idx])
        excess = excess[excess > 0.0]
        empirical = u + np.quantile(excess, probs) if excess.size else np.full(probs.shape, np.nan)
        model = u + gp_quantile(probs, fit.tau_fn(center), fit.xi_fn(center))
        out[center] = {"probs": probs, "empirical": empirical, "model": model,
                       "n_exceedances": int(excess.size)}
    return out


def angular_histogram(angles, bins: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width periodic histogram on (-2, 2], normalized to a density."""
    if bins < 8:
        raise ValueError("need at least 8 bins")
    angles = wrap_angle(np.asarray(angles, dtype=float))
    edges = np.linspace(-2.0, 2.0, bins + 1)
    counts, _ = np.histogram(angles, bins=edges)
    densities = counts / (angles.size * (4.0 / bins))
    return edges, densities
