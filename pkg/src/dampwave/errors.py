"""Exception types shared across the package."""


class DampwaveError(Exception):
    """Base class for package errors."""


class ConfigError(DampwaveError):
    """Invalid configuration or constructor arguments."""


class UnsupportedOrderError(DampwaveError):
    """A jet was requested beyond the order a symbol supports."""


class DegenerateCovectorError(DampwaveError):
    """Ray tracing started at xi = 0."""


class RayBlowupError(DampwaveError):
    """A traced ray left the admissible frequency band."""


class InstabilityError(DampwaveError):
    """Numerical blow-up detected during time stepping (dz too large)."""


class GridMismatchError(DampwaveError):
    """Operands defined on different grids."""


class QuadratureError(DampwaveError):
    """A requested evaluation depth is not on the quadrature ladder."""
