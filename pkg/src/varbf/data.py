"""Plain value types passed between modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError

SD_DIVISORS = ("n-1", "n")


@dataclass(frozen=True)
class GroupStats:
    """Sufficient statistics of one Gaussian group.

    Attributes:
        n: Number of observations.
        ss: Sum of squared deviations from the group mean.
        pooled: Number of original groups merged into this one. Each merged
            group keeps its own mean, so the residual degrees of freedom are
            ``n - pooled``.
    """

    n: int
    ss: float
    pooled: int = 1

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"sample size must be a positive integer, got {self.n!r}")
        if isinstance(self.pooled, bool) or int(self.pooled) != self.pooled or self.pooled < 1:
            raise ValidationError(f"pooled count must be a positive integer, got {self.pooled!r}")
        if self.pooled > self.n:
            raise ValidationError("a pooled group needs at least one observation per member")
        ss = float(self.ss)
        if not math.isfinite(ss) or ss < 0:
            raise ValidationError(f"sum of squares must be finite and >= 0, got {self.ss!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "pooled", int(self.pooled))
        object.__setattr__(self, "ss", 0.0 if self.n == self.pooled else ss)

    @property
    def df(self) -> int:
        return self.n - self.pooled

    @classmethod
    def from_sd(cls, n: int, sd: float, divisor: str = "n-1") -> "GroupStats":
        """Build stats from a reported standard deviation.

        ``divisor`` states how ``sd`` was computed: ``"n-1"`` for the usual
        unbiased estimate, ``"n"`` for the maximum-likelihood one.
        """
        if divisor not in SD_DIVISORS:
            raise ValidationError(f"sd divisor must be one of {SD_DIVISORS}, got {divisor!r}")
        if not math.isfinite(sd) or sd < 0:
            raise ValidationError(f"standard deviation must be finite and >= 0, got {sd!r}")
        factor = n - 1 if divisor == "n-1" else n
        return cls(n, factor * sd * sd)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "GroupStats":
        x = np.asarray(values, dtype=float)
        if x.size == 0:
            raise ValidationError("a group needs at least one observation")
        if not np.all(np.isfinite(x)):
            raise ValidationError("observations must be finite")
        return cls(int(x.size), float(np.sum((x - x.mean()) ** 2)))


@dataclass(frozen=True)
class PriorSpec:
    """Beta(alpha1, alpha2) prior on the precision weight of group 1."""

    alpha1: float = 0.5
    alpha2: float | None = None

    def __post_init__(self):
        a2 = self.alpha1 if self.alpha2 is None else self.alpha2
        for a in (self.alpha1, a2):
            if not (math.isfinite(a) and a > 0):
                raise DomainError(f"prior shape must be positive and finite, got {a!r}")
        object.__setattr__(self, "alpha1", float(self.alpha1))
        object.__setattr__(self, "alpha2", float(a2))

    @property
    def information_consistent(self) -> bool:
        return max(self.alpha1, self.alpha2) <= 0.5

    def swapped(self) -> "PriorSpec":
        return PriorSpec(self.alpha2, self.alpha1)


@dataclass(frozen=True)
class DeltaInterval:
    """Closed interval of the standard-deviation ratio, ``hi`` may be infinite."""

    lo: float
    hi: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo < 0 or math.isinf(lo) or not lo < hi:
            raise DomainError(f"invalid delta interval [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def parse(cls, text: str) -> "DeltaInterval":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValidationError(f"interval must look like 'lo,hi', got {text!r}")
        try:
            lo, hi = (float(p) for p in parts)
        except ValueError as exc:
            raise ValidationError(f"interval bounds must be numbers, got {text!r}") from exc
        try:
            return cls(lo, hi)
        except DomainError as exc:
            raise ValidationError(str(exc)) from exc

    def contains(self, other: "DeltaInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def overlaps(self, other: "DeltaInterval") -> bool:
        """True when the interiors intersect; touching endpoints do not count."""
        return max(self.lo, other.lo) < min(self.hi, other.hi)

    @property
    def is_full(self) -> bool:
        return self.lo == 0 and math.isinf(self.hi)


METHODS = ("closed_form", "quadrature", "bridge_encompassing")


@dataclass(frozen=True)
class BayesFactorResult:
    """A log Bayes factor together with how it was obtained."""

    log_bf: float
    method: str
    mc_se: float | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def log_bf10(self) -> float:
        return self.log_bf

    @property
    def bf(self) -> float:
        return math.exp(self.log_bf) if self.log_bf < 709.0 else math.inf

    def inverse(self) -> "BayesFactorResult":
        return BayesFactorResult(-self.log_bf, self.method, self.mc_se, self.flags)
