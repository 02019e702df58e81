"""Exception types raised by the package."""


class EstimationError(Exception):
    """Base class."""


class NonErgodicChain(EstimationError):
    pass


class NotBalanced(EstimationError):
    pass


class BoundViolation(EstimationError):
    pass


class DimensionMismatch(EstimationError, ValueError):
    pass


class DegenerateInterval(EstimationError, ValueError):
    pass


class InvalidExponent(EstimationError, ValueError):
    pass


class NonPositiveInput(EstimationError, ValueError):
    pass


class NonPositiveTrace(EstimationError, ValueError):
    pass


class EmptyInput(EstimationError, ValueError):
    pass


class ConfigInvalid(EstimationError):
    """A configuration parsed but fails a modelling assumption."""

    def __init__(self, message: str, failed: list[str] | None = None):
        super().__init__(message)
        self.failed = failed or []
