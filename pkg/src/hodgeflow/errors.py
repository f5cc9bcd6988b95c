"""Exception types shared across the package."""


class HodgeFlowError(Exception):
    """Base class for all package-specific errors."""


class NumericalBlowup(HodgeFlowError):
    """A field operation produced NaN or Inf values."""


class DegenerateForm(HodgeFlowError):
    """The volume potential dropped to (or below) the configured floor."""


class CohomologyMismatch(HodgeFlowError):
    """Periods of a form do not match the required cohomology class."""


class BadSeries(HodgeFlowError):
    """A diagnostic series is unusable (non-positive values, too short, ...)."""


class NoConvergence(HodgeFlowError):
    """An iterative solve exhausted its iteration budget."""


class FormatError(HodgeFlowError):
    """A snapshot file is malformed or truncated."""
