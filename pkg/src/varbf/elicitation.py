"""Choosing the prior shape alpha from a probability statement about delta."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .data import DeltaInterval, PriorSpec
from .errors import DomainError
from .two_sample import log_delta_mass

ALPHA_BOUNDS = (1e-4, 1e4)


@dataclass(frozen=True)
class ElicitationTarget:
    """P(delta in interval | delta in truncation) should equal prob."""

    interval: DeltaInterval
    prob: float
    truncation: DeltaInterval | None = None

    def __post_init__(self):
        if not (0 < self.prob < 1):
            raise DomainError(f"target probability must lie in (0, 1), got {self.prob!r}")
        if self.truncation is not None and not self.truncation.contains(self.interval):
            raise DomainError("the interval must lie inside the truncation range")


def delta_interval_prob(interval: DeltaInterval, alpha: float, truncation: DeltaInterval | None = None) -> float:
    """Prior probability of ``interval`` under the symmetric Beta(alpha, alpha) prior on rho.

    With a truncation range the probability is conditional on it.
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"prior shape must be positive, got {alpha!r}")
    if truncation is not None and not truncation.contains(interval):
        raise DomainError("the interval must lie inside the truncation range")
    prior = PriorSpec(alpha)
    try:
        log_p = log_delta_mass(interval, prior)
    except DomainError:
        # the interval's mass underflowed
        return 0.0
    if truncation is not None:
        log_p -= log_delta_mass(truncation, prior)
    return min(1.0, math.exp(log_p))


def solve_alpha(target: ElicitationTarget, bounds: tuple[float, float] = ALPHA_BOUNDS) -> float:
    """alpha for which the target probability holds, found on the log scale."""

    def gap(log_alpha: float) -> float:
        return delta_interval_prob(target.interval, math.exp(log_alpha), target.truncation) - target.prob

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0:
        return bounds[0]
    if g_hi == 0:
        return bounds[1]
    if g_lo * g_hi > 0:
        p_lo, p_hi = sorted((g_lo + target.prob, g_hi + target.prob))
        raise DomainError(
            f"no alpha in [{bounds[0]:g}, {bounds[1]:g}] gives probability {target.prob}; "
            f"attainable range is [{p_lo:.6g}, {p_hi:.6g}]"
        )
    root = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    return math.exp(root)
