"""Exception types shared across the package."""


class BipptError(Exception):
    """Base class for package-specific errors."""


class ShapeError(BipptError, ValueError):
    """Matrix or stack dimensions are inconsistent."""


class ArityError(BipptError, ValueError):
    """Subsystem count outside the supported range."""


class DomainError(BipptError, ValueError):
    """Scalar argument outside its mathematical domain."""


class ModelError(BipptError, ValueError):
    """Problem data violates a model assumption."""


class NumericalError(BipptError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class ConfigError(BipptError, ValueError):
    """Invalid run configuration (command line or input files)."""
