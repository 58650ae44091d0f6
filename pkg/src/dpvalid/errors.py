"""Exception types shared across the toolkit."""


class DpvalidError(Exception):
    """Base class for all toolkit errors."""

    code = "internal-error"


class InvalidParameterError(DpvalidError, ValueError):
    """A privacy parameter, sensitivity, or option is out of range."""

    code = "invalid-parameter"


class CalibrationError(DpvalidError, ValueError):
    """A noise calibration is unavailable for the requested regime."""

    code = "calibration-unsupported"


class BudgetExceededError(DpvalidError):
    """A charge would push spent privacy loss past the dataset total."""

    code = "budget-exceeded"

    def __init__(self, message: str, remaining_epsilon: float, remaining_delta: float):
        super().__init__(message)
        self.remaining_epsilon = remaining_epsilon
        self.remaining_delta = remaining_delta


class InsufficientDataError(DpvalidError):
    """A query targets fewer rows than the minimum subset size."""

    code = "insufficient-data"


class NotFoundError(DpvalidError, KeyError):
    """Unknown dataset or resource id."""

    code = "not-found"


class DegenerateFitError(DpvalidError, ValueError):
    """A regression fit is impossible (for example noisy n too small)."""

    code = "degenerate-fit"


class UndefinedMetricError(DpvalidError, ValueError):
    """A utility metric is undefined for the given inputs."""

    code = "undefined-metric"


class MalformedRequestError(DpvalidError, ValueError):
    """A request or configuration payload fails validation."""

    code = "malformed-request"
