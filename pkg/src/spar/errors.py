"""Exception hierarchy for the spar package."""


class SparError(Exception):
    """Base class for package-specific failures."""


class ConfigError(SparError, ValueError):
    """Invalid run configuration or incompatible model/config pairing."""


class DataError(SparError, ValueError):
    """Input data cannot be ingested (missing file, malformed rows, too small)."""


class FitError(SparError, RuntimeError):
    """Model fitting failed (non-convergence, insufficient exceedances)."""


class NumericalError(SparError, ArithmeticError):
    """A numerical routine (quadrature, root finding) failed to converge."""
