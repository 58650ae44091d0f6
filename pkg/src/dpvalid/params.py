"""Privacy parameter types and loss-accounting conversions.

The toolkit works in the add/remove-one-record (unbounded) neighboring
relation throughout. Approximate DP is tracked as an (epsilon, delta) pair,
zero-concentrated DP as a single rho, and the conversions below move between
the two calculi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) privacy budget or charge.

    epsilon must be positive; delta lies in [0, 1], with delta = 0 meaning
    pure DP.
    """

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0) or not math.isfinite(self.epsilon):
            raise InvalidParameterError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0.0 <= self.delta <= 1.0):
            raise InvalidParameterError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class ZcdpParams:
    """A zero-concentrated DP budget, rho > 0."""

    rho: float

    def __post_init__(self):
        if not (self.rho > 0) or not math.isfinite(self.rho):
            raise InvalidParameterError(f"rho must be positive and finite, got {self.rho}")


@dataclass(frozen=True)
class GlobalSensitivity:
    """Worst-case change of a query over neighboring datasets.

    Either norm may be omitted when the caller only needs the other one.
    When both are given for the same vector-valued query the l1 norm can
    never be smaller than the l2 norm.
    """

    l1: float | None = None
    l2: float | None = None

    def __post_init__(self):
        for name, v in (("l1", self.l1), ("l2", self.l2)):
            if v is not None and (not math.isfinite(v) or v < 0):
                raise InvalidParameterError(f"{name} sensitivity must be finite and nonnegative, got {v}")
        if self.l1 is not None and self.l2 is not None and self.l1 < self.l2 - 1e-12:
            raise InvalidParameterError(
                f"l1 sensitivity ({self.l1}) cannot be below l2 sensitivity ({self.l2})"
            )

    def require_l1(self) -> float:
        if self.l1 is None:
            raise InvalidParameterError("operation needs an l1 sensitivity")
        return self.l1

    def require_l2(self) -> float:
        if self.l2 is None:
            raise InvalidParameterError("operation needs an l2 sensitivity")
        return self.l2


def zcdp_to_approx_dp(z: ZcdpParams, delta: float) -> PrivacyParams:
    """Convert a rho-zCDP guarantee to (epsilon, delta)-DP.

    epsilon = rho + 2 * sqrt(rho * ln(1/delta)) for any target delta in (0, 1).
    """
    if not (0.0 < delta < 1.0):
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    eps = z.rho + 2.0 * math.sqrt(z.rho * math.log(1.0 / delta))
    return PrivacyParams(epsilon=eps, delta=delta)


def pure_dp_to_zcdp(epsilon: float) -> ZcdpParams:
    """A pure epsilon-DP mechanism satisfies (epsilon^2 / 2)-zCDP."""
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    return ZcdpParams(rho=epsilon * epsilon / 2.0)


def gaussian_zcdp(sens: GlobalSensitivity, sigma: float) -> ZcdpParams:
    """zCDP cost of Gaussian noise: rho = Delta_2^2 / (2 sigma^2)."""
    l2 = sens.require_l2()
    if l2 <= 0:
        raise InvalidParameterError(f"l2 sensitivity must be positive, got {l2}")
    if not (sigma > 0) or not math.isfinite(sigma):
        raise InvalidParameterError(f"sigma must be positive and finite, got {sigma}")
    return ZcdpParams(rho=l2 * l2 / (2.0 * sigma * sigma))
