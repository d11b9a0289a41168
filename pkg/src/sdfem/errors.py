"""Exception types raised across the package."""


class SdfemError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SdfemError, ValueError):
    """Invalid mesh, problem or run configuration."""


class AssemblyError(SdfemError):
    """Element-level failure during assembly (e.g. a degenerate triangle)."""


class UnsupportedOperationError(SdfemError):
    """Requested operation needs data the object does not carry."""


class SingularMatrixError(SdfemError, ArithmeticError):
    pass


class GmresBreakdown(SdfemError, ArithmeticError):
    """Arnoldi produced a zero vector before the residual target was met."""


class UndefinedRateError(SdfemError, ValueError):
    pass
