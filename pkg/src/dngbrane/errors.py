"""Exception types raised across the package."""


class BraneError(Exception):
    """Base class for all package errors."""


class NonFiniteError(BraneError, ValueError):
    """A field contains NaN or Inf entries."""


class DegenerateGeometryError(BraneError, ValueError):
    """A metric, tangent set or lapse became (numerically) degenerate."""


class SignatureError(BraneError, ValueError):
    """A metric does not have Lorentzian signature (-,+,...,+)."""


class BackgroundError(BraneError, ValueError):
    """An operation is not defined on the requested background."""


class ConstraintDriftError(BraneError, RuntimeError):
    """Constraint violation grew past the configured ceiling during evolution."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ConfigError(BraneError, ValueError):
    """Invalid scenario configuration."""
