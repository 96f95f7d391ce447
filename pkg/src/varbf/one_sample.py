"""Testing one Gaussian variance against a known reference value.

With xi = tau / tau0 and delta = sigma0 / sigma = sqrt(xi), the prior on xi is
BetaPrime(alpha, alpha), the limit of the two-sample prior when the reference
group becomes infinitely large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import BayesFactorResult, DeltaInterval, PriorSpec
from .errors import DomainError
from .specfun import log_beta, log_gamma, log_integrate, log_tricomi_u
from .two_sample import log_delta_mass


@dataclass(frozen=True)
class OneSampleProblem:
    """A sample summarized by (n, ss) and a reference precision tau0 = 1/sigma0^2."""

    n: int
    ss: float
    tau0: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"sample size must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.ss) and self.ss >= 0):
            raise DomainError(f"sum of squares must be finite and >= 0, got {self.ss!r}")
        if not (math.isfinite(self.tau0) and self.tau0 > 0):
            raise DomainError(f"reference precision must be positive, got {self.tau0!r}")
        if self.n >= 2 and self.ss == 0:
            raise DomainError("a sample with n >= 2 has zero spread; the Bayes factor is not defined")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "ss", 0.0 if self.n == 1 else float(self.ss))

    @classmethod
    def from_sd(cls, n: int, sd: float, popsd: float, divisor: str = "n-1") -> "OneSampleProblem":
        from .data import GroupStats

        g = GroupStats.from_sd(n, sd, divisor)
        return cls(g.n, g.ss, 1.0 / (popsd * popsd))

    @property
    def z(self) -> float:
        return 0.5 * self.tau0 * self.ss


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"prior shape must be positive, got {alpha!r}")


def log_bf10_one(problem: OneSampleProblem, alpha: float = 0.5) -> BayesFactorResult:
    """Bayes factor for sigma != sigma0 against sigma = sigma0."""
    _check_alpha(alpha)
    if problem.n == 1:
        return BayesFactorResult(0.0, "closed_form")
    a = (problem.n - 1) / 2 + alpha
    b = (problem.n - 1) / 2 - alpha + 1
    z = problem.z
    value = log_gamma(a) + log_tricomi_u(a, b, z) - log_beta(alpha, alpha) + z
    return BayesFactorResult(float(value), "closed_form")


def _log_kernel(u, problem: OneSampleProblem, alpha: float):
    """log of likelihood ratio times prior density of xi, times xi, at xi = exp(u)."""
    z = problem.z
    return (
        ((problem.n - 1) / 2 + alpha) * u
        - 2 * alpha * np.logaddexp(0.0, u)
        - z * np.expm1(u)
        - log_beta(alpha, alpha)
    )


def _log_interval_ratio(interval: DeltaInterval | None, problem: OneSampleProblem, alpha: float) -> float:
    if interval is None:
        return 0.0
    lo = -math.inf if interval.lo == 0 else 2 * math.log(interval.lo)
    hi = math.inf if math.isinf(interval.hi) else 2 * math.log(interval.hi)
    log_int = log_integrate(lambda u: _log_kernel(u, problem, alpha), lo, hi)
    return log_int - log_delta_mass(interval, PriorSpec(alpha))


def log_bf_directed_one(
    problem: OneSampleProblem,
    alpha: float,
    null_interval: DeltaInterval | None,
    alt_interval: DeltaInterval,
) -> BayesFactorResult:
    """Bayes factor of ``alt_interval`` against ``null_interval`` for delta = sigma0/sigma.

    ``null_interval=None`` is the point hypothesis sigma = sigma0.
    """
    _check_alpha(alpha)
    if null_interval is not None and null_interval != alt_interval and null_interval.overlaps(alt_interval):
        raise DomainError("interval hypotheses must not overlap except at endpoints")
    if problem.n == 1:
        return BayesFactorResult(0.0, "quadrature")
    value = _log_interval_ratio(alt_interval, problem, alpha) - _log_interval_ratio(null_interval, problem, alpha)
    return BayesFactorResult(float(value), "quadrature")


def _log_normalizer(problem: OneSampleProblem, alpha: float) -> float:
    a = (problem.n - 1) / 2 + alpha
    b = (problem.n - 1) / 2 - alpha + 1
    return log_gamma(a) + log_tricomi_u(a, b, problem.z)


def posterior_xi_pdf_one(xi, problem: OneSampleProblem, alpha: float = 0.5):
    """Posterior density of xi = tau / tau0."""
    _check_alpha(alpha)
    x = np.asarray(xi, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("xi must be positive")
    a = (problem.n - 1) / 2 + alpha
    logp = (a - 1) * np.log(x) - 2 * alpha * np.log1p(x) - problem.z * x - _log_normalizer(problem, alpha)
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def posterior_delta_pdf_one(delta, problem: OneSampleProblem, alpha: float = 0.5):
    """Posterior density of delta = sigma0 / sigma."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("delta must be positive")
    out = np.asarray(posterior_xi_pdf_one(d * d, problem, alpha)) * 2 * d
    return float(out) if out.ndim == 0 else out
