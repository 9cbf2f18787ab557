"""Semi-parametric angular-radial modelling of bivariate extremes.

The package transforms bivariate data to angular-radial coordinates (L1 or
L2), estimates the angular density with a circular kernel, models the
conditional radial tail above an angle-dependent threshold with a
non-stationary generalized Pareto distribution (penalized cyclic splines),
and derives isodensity contours, return level sets, simulations, and
bootstrap uncertainty bands from the assembled model.
"""

__version__ = "0.1.0"

from .coords import CoordinateSystem, PolarSample, from_polar, jacobian, to_polar
from .errors import ConfigError, DataError, FitError, NumericalError, SparError

from .circular_kde import AngularKde, fit_kde, vm_kernel
from .copulas import (CopulaFamily, CopulaSpec, laplace_inverse, sample_copula,
                      sample_laplace, true_angular_density,
                      true_isodensity_contour, true_joint_density, true_threshold)
from .fitting import GpFit, ThresholdFit, fit_gp, fit_threshold, mod_check
from .gpd import fit_gp_stationary, gp_pdf, gp_quantile, gp_sf
from .model import FitConfig, Normalization, SparFit, fit_spar
from .splines import CyclicSplineBasis, SplineFunction, place_knots

__all__ = [
    "__version__",
    "AngularKde", "ConfigError", "CoordinateSystem", "CopulaFamily",
    "CopulaSpec", "CyclicSplineBasis", "DataError", "FitConfig", "FitError",
    "GpFit", "Normalization", "NumericalError", "PolarSample", "SparError",
    "SparFit", "SplineFunction", "ThresholdFit",
    "fit_gp", "fit_gp_stationary", "fit_kde", "fit_spar", "fit_threshold",
    "from_polar", "gp_pdf", "gp_quantile", "gp_sf", "jacobian",
    "laplace_inverse", "mod_check", "place_knots", "sample_copula",
    "sample_laplace", "to_polar", "true_angular_density",
    "true_isodensity_contour", "true_joint_density", "true_threshold",
    "vm_kernel",
]
