"""Exception types shared across the package."""


class DeviateError(Exception):
    """Base class for errors raised by this package."""


class DomainError(DeviateError, ValueError):
    """Parameter values outside the admissible domain (non-PD scale, bad mixing weight)."""


class EstimationError(DeviateError, RuntimeError):
    """Estimation could not produce a usable result (e.g. every restart degenerated)."""


class NumericError(DeviateError, RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
