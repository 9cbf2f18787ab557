"""The assembled angular-radial tail model.

A fitted model combines the angular kernel density, the threshold function
u(q), and the GP scale/shape functions into a joint density valid on the
exceedance region {(r, q): r >= u(q)}, which carries probability mass
1 - gamma by construction.  From it we derive isodensity contours, constant
total-exceedance ("return level") sets, and simulations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .circular_kde import AngularKde, fit_kde
from .coords import (CoordinateSystem, from_polar, jacobian, polar_sample,
                     to_polar, wrap_angle)
from .copulas import make_rng
from .errors import ConfigError
from .fitting import (DEFAULT_CHECK_SMOOTHING, GpFit, ThresholdFit, fit_gp,
                      fit_threshold)
from .gpd import gp_pdf, gp_quantile
from .splines import CyclicSplineBasis, SplineFunction, place_knots


@dataclass(frozen=True)
class Normalization:
    """Per-column affine standardization applied at ingestion."""

    mean_x: float = 0.0
    mean_y: float = 0.0
    sd_x: float = 1.0
    sd_y: float = 1.0

    def apply(self, xy: np.ndarray) -> np.ndarray:
        return (xy - [self.mean_x, self.mean_y]) / [self.sd_x, self.sd_y]

    def invert(self, xy: np.ndarray) -> np.ndarray:
        return xy * [self.sd_x, self.sd_y] + [self.mean_x, self.mean_y]

    def compose(self, inner: "Normalization") -> "Normalization":
        """Constants of applying ``inner`` first, then ``self``."""
        return Normalization(
            mean_x=inner.mean_x + self.mean_x * inner.sd_x,
            mean_y=inner.mean_y + self.mean_y * inner.sd_y,
            sd_x=inner.sd_x * self.sd_x,
            sd_y=inner.sd_y * self.sd_y,
        )

    @property
    def is_identity(self) -> bool:
        return (self.mean_x, self.mean_y, self.sd_x, self.sd_y) == (0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class FitConfig:
    """Everything needed to (re)fit the model pipeline on a data set."""

    system: CoordinateSystem = CoordinateSystem.L1
    margins: str = "laplace"  # "laplace": use data as-is; "raw": standardize
    gamma: float | None = None  # default depends on margins
    k_threshold: int | None = None
    k_scale: int | None = None
    k_shape: int = 12
    shape_mode: str = "spline"  # or "constant"
    bandwidth: float = 1.0 / 50.0
    grid_size: int = 4096
    lambdas: tuple | None = None
    check_smoothing: float = DEFAULT_CHECK_SMOOTHING
    cv_folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "system", CoordinateSystem.parse(self.system))
        if self.margins not in ("laplace", "raw"):
            raise ConfigError("margins must be 'laplace' or 'raw'")
        if self.shape_mode not in ("spline", "constant"):
            raise ConfigError("shape_mode must be 'spline' or 'constant'")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        for name in ("k_threshold", "k_scale"):
            kv = getattr(self, name)
            if kv is not None and kv < 4:
                raise ConfigError(f"{name} must be at least 4")
        if self.k_shape < 4:
            raise ConfigError("k_shape must be at least 4")
        if self.bandwidth <= 0.0:
            raise ConfigError("bandwidth must be positive")

    # mode-dependent defaults: Laplace-margin studies vs standardized raw data
    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.8 if self.margins == "laplace" else 0.7

    def resolved_k_threshold(self) -> int:
        if self.k_threshold is not None:
            return self.k_threshold
        return 25 if self.margins == "laplace" else 35

    def resolved_k_scale(self) -> int:
        if self.k_scale is not None:
            return self.k_scale
        return 25 if self.margins == "laplace" else 35


@dataclass
class SparFit:
    """Fitted angular-radial tail model."""

    system: CoordinateSystem
    gamma: float
    angular: AngularKde
    threshold: ThresholdFit
    gp: GpFit
    normalization: Normalization = field(default_factory=Normalization)
    metadata: dict = field(default_factory=dict)

    # ---- component functions on the model (normalized) scale -------------

    def threshold_fn(self, q):
        return self.threshold.threshold(q)

    def tau_fn(self, q):
        return self.gp.tau(q)

    def xi_fn(self, q):
        return self.gp.shape(q)

    def angular_density(self, q):
        return self.angular.density(q)

    # ---- densities --------------------------------------------------------

    def polar_density(self, r, q):
        """Joint (R, Q) density on the exceedance region; errors below it."""
        r = np.asarray(r, dtype=float)
        q = wrap_angle(np.asarray(q, dtype=float))
        u = self.threshold.threshold(q)
        if np.any(r < u):
            raise ValueError("point lies below the threshold function: "
                             "the model density is undefined there")
        out = (1.0 - self.gamma) * self.angular.density(q) \
            * gp_pdf(r - u, self.gp.tau(q), self.gp.shape(q))
        return out if out.ndim else float(out)

    def cartesian_density(self, x, y, original_scale: bool = False):
        """Joint (X, Y) density; set original_scale to work in data units."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if original_scale:
            xy = self.normalization.apply(np.column_stack([np.ravel(x), np.ravel(y)]))
            xn, yn = xy[:, 0].reshape(x.shape), xy[:, 1].reshape(y.shape)
        else:
            xn, yn = x, y
        r, q = to_polar(self.system, xn, yn)
        out = self.polar_density(r, q) / jacobian(self.system, r)
        if original_scale:
            out = out / (self.normalization.sd_x * self.normalization.sd_y)
        return out if np.ndim(out) else float(out)

    # ---- derived sets ------------------------------------------------------

    def isodensity_contour(self, level: float, q_grid) -> np.ndarray:
        """Radius where the Cartesian model density equals ``level``, per angle.

        NaN marks angles where the density is below the level everywhere on
        the exceedance region.  The radial profile is strictly decreasing, so
        the bisection bracket is safe.
        """
        if level <= 0.0:
            raise ValueError("density level must be positive")
        q_grid = np.atleast_1d(wrap_angle(np.asarray(q_grid, dtype=float)))
        one_m_g = 1.0 - self.gamma
        radii = np.full(q_grid.shape, np.nan)
        for i, qi in enumerate(q_grid):
            u = float(self.threshold.threshold(qi))
            tau = float(self.gp.tau(qi))
            xi = float(self.gp.shape(qi))
            fq = float(self.angular.density(qi))

            def profile(r):
                return one_m_g * fq * gp_pdf(r - u, tau, xi) / jacobian(self.system, r) - level

            if profile(u) < 0.0:
                continue
            hi = u + 10.0 * tau
            sup = u - tau / xi if xi < 0.0 else np.inf
            while profile(hi) > 0.0:
                if hi >= sup:
                    hi = sup
                    break
                hi = min(u + 2.0 * (hi - u), sup)
            if hi >= sup and xi < 0.0:
                # support endpoint: density falls to zero (or jumps) there
                hi = np.nextafter(sup, u)
                if profile(hi) > 0.0:
                    radii[i] = hi
                    continue
            radii[i] = brentq(profile, u, hi, xtol=1e-8)
        return radii

    def return_level_set(self, exceed_prob: float, q_grid) -> np.ndarray:
        """Radius whose total exceedance probability is ``exceed_prob``."""
        a = float(exceed_prob)
        if not 0.0 < a < 1.0 - self.gamma:
            raise ValueError(
                f"exceedance probability must lie in (0, {1.0 - self.gamma:g}): "
                "larger values fall inside the body of the distribution"
            )
        q_grid = np.atleast_1d(wrap_angle(np.asarray(q_grid, dtype=float)))
        level = (1.0 - a - self.gamma) / (1.0 - self.gamma)
        u = self.threshold.threshold(q_grid)
        return u + gp_quantile(level, self.gp.tau(q_grid), self.gp.shape(q_grid))

    def return_level_set_years(self, years: float, obs_per_year: float, q_grid) -> np.ndarray:
        """K-year return level set for a sampling rate of obs_per_year."""
        return self.return_level_set(1.0 / (obs_per_year * years), q_grid)

    def simulate(self, n: int, seed) -> np.ndarray:
        """Draw n points from the fitted model, returned in data units."""
        if n < 1:
            raise ValueError("sample size must be at least 1")
        rng = make_rng(seed)
        q = self.angular.cdf_inverse(np.clip(rng.random(n), 1e-15, 1.0 - 1e-15))
        y = gp_quantile(rng.random(n), self.gp.tau(q), self.gp.shape(q))
        r = self.threshold.threshold(q) + y
        x, yc = from_polar(self.system, r, q)
        return self.normalization.invert(np.column_stack([x, yc]))

    # ---- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        def spline_doc(fn: SplineFunction) -> dict:
            return {"intercept": fn.intercept, "coeffs": fn.coeffs.tolist()}

        gp_xi = (
            {"kind": "constant", "value": self.gp.xi}
            if self.gp.constant_shape
            else {
                "kind": "spline",
                "knots": self.gp.xi.basis.knots.tolist(),
                **spline_doc(self.gp.xi),
            }
        )
        return {
            "format": "spar-model",
            "schema_version": 1,
            "package_version": __version__,
            "system": self.system.value,
            "gamma": self.gamma,
            "normalization": {
                "mean_x": self.normalization.mean_x,
                "mean_y": self.normalization.mean_y,
                "sd_x": self.normalization.sd_x,
                "sd_y": self.normalization.sd_y,
            },
            "angular": {
                "bandwidth": self.angular.bandwidth,
                "grid_size": self.angular.grid_size,
                "angles": self.angular.angles.tolist(),
            },
            "threshold": {
                "gamma": self.threshold.gamma,
                "c": self.threshold.c,
                "lambda_u": self.threshold.lambda_u,
                "lambda_sigma": self.threshold.lambda_sigma,
                "exceed_rate": self.threshold.exceed_rate,
                "knots": self.threshold.log_u.basis.knots.tolist(),
                "log_u": spline_doc(self.threshold.log_u),
                "log_sigma": spline_doc(self.threshold.log_sigma),
            },
            "gp": {
                "lambda_tau": self.gp.lambda_tau,
                "lambda_xi": self.gp.lambda_xi,
                "knots_tau": self.gp.log_tau.basis.knots.tolist(),
                "log_tau": spline_doc(self.gp.log_tau),
                "xi": gp_xi,
            },
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SparFit":
        if doc.get("format") != "spar-model":
            raise ConfigError("not a spar model document")
        angular = AngularKde(
            angles=np.asarray(doc["angular"]["angles"], dtype=float),
            bandwidth=doc["angular"]["bandwidth"],
            grid_size=doc["angular"]["grid_size"],
        )
        th = doc["threshold"]
        basis_u = CyclicSplineBasis(np.asarray(th["knots"], dtype=float))
        threshold = ThresholdFit(
            gamma=th["gamma"], c=th["c"],
            log_u=SplineFunction(basis_u, th["log_u"]["intercept"],
                                 np.asarray(th["log_u"]["coeffs"], float)),
            log_sigma=SplineFunction(basis_u, th["log_sigma"]["intercept"],
                                     np.asarray(th["log_sigma"]["coeffs"], float)),
            lambda_u=th["lambda_u"], lambda_sigma=th["lambda_sigma"],
            exceed_rate=th["exceed_rate"],
        )
        gd = doc["gp"]
        basis_tau = CyclicSplineBasis(np.asarray(gd["knots_tau"], dtype=float))
        if gd["xi"]["kind"] == "constant":
            xi: SplineFunction | float = float(gd["xi"]["value"])
        else:
            basis_xi = CyclicSplineBasis(np.asarray(gd["xi"]["knots"], dtype=float))
            xi = SplineFunction(basis_xi, gd["xi"]["intercept"],
                                np.asarray(gd["xi"]["coeffs"], float))
        gp = GpFit(
            log_tau=SplineFunction(basis_tau, gd["log_tau"]["intercept"],
                                   np.asarray(gd["log_tau"]["coeffs"], float)),
            xi=xi, lambda_tau=gd["lambda_tau"], lambda_xi=gd["lambda_xi"],
        )
        norm = Normalization(**doc["normalization"])
        return cls(system=CoordinateSystem.parse(doc["system"]), gamma=doc["gamma"],
                   angular=angular, threshold=threshold, gp=gp,
                   normalization=norm, metadata=doc.get("metadata", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "SparFit":
        return cls.from_dict(json.loads(Path(path).read_text()))


def standardize(xy: np.ndarray) -> tuple[np.ndarray, Normalization]:
    """Center and scale each column to zero mean and unit (ddof=0) variance."""
    xy = np.asarray(xy, dtype=float)
    mean = xy.mean(axis=0)
    sd = xy.std(axis=0)
    if np.any(sd <= 0.0):
        raise ValueError("degenerate column: zero variance")
    norm = Normalization(mean_x=float(mean[0]), mean_y=float(mean[1]),
                         sd_x=float(sd[0]), sd_y=float(sd[1]))
    return norm.apply(xy), norm


def fit_spar(xy: np.ndarray, config: FitConfig,
             applied: Normalization | None = None,
             warm: SparFit | None = None) -> SparFit:
    """Fit the full pipeline to Cartesian data.

    In raw mode the data are standardized here and the recorded
    normalization composes with any ``applied`` constants from ingestion, so
    the stored model always maps original data units to the model scale.
    ``warm`` supplies starting coefficients (the smoothing grids are still
    searched), which speeds up bootstrap refits considerably.
    """
    xy = np.asarray(xy, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of points")
    if config.margins == "raw":
        xy, norm = standardize(xy)
        norm = norm.compose(applied) if applied is not None else norm
    else:
        norm = applied if applied is not None else Normalization()

    gamma = config.resolved_gamma()
    sample = polar_sample(config.system, xy[:, 0], xy[:, 1])

    kde = fit_kde(sample.q, config.bandwidth, config.grid_size)

    lambdas = None if config.lambdas is None else np.asarray(config.lambdas, float)
    basis_u = CyclicSplineBasis(place_knots(sample.q, config.resolved_k_threshold()))
    threshold = fit_threshold(
        sample, basis_u, gamma, c=config.check_smoothing, lambdas=lambdas,
        n_folds=config.cv_folds,
        warm_start=warm.threshold if warm is not None else None,
    )

    exceed_q = sample.q[sample.r > threshold.threshold(sample.q)]
    basis_tau = CyclicSplineBasis(place_knots(exceed_q, config.resolved_k_scale()))
    basis_xi = (
        CyclicSplineBasis(place_knots(exceed_q, config.k_shape))
        if config.shape_mode == "spline" else None
    )
    gp = fit_gp(
        sample, threshold, basis_tau, basis_xi, lambdas=lambdas,
        n_folds=config.cv_folds, warm_start=warm.gp if warm is not None else None,
    )

    metadata = {
        "n_observations": int(xy.shape[0]),
        "n_exceedances": int(np.sum(sample.r > threshold.threshold(sample.q))),
        "lambda_u": threshold.lambda_u,
        "lambda_sigma": threshold.lambda_sigma,
        "lambda_tau": gp.lambda_tau,
        "lambda_xi": gp.lambda_xi,
        "exceed_rate": threshold.exceed_rate,
        "margins": config.margins,
        "shape_mode": config.shape_mode,
    }
    return SparFit(system=config.system, gamma=gamma, angular=kde,
                   threshold=threshold, gp=gp, normalization=norm,
                   metadata=metadata)
