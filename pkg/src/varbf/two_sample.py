"""Bayes factors and posteriors for comparing two Gaussian variances.

Parameterization: the group precisions are written as tau_1 = 2 rho tau and
tau_2 = 2 (1 - rho) tau, with a Beta(alpha1, alpha2) prior on rho and the
scale-invariant 1/tau prior on tau. The ratio of standard deviations is
delta = sigma_2 / sigma_1 = sqrt(rho / (1 - rho)).

Marginal likelihoods share the constant
pi^((2-n)/2) Gamma((n-2)/2) (n1 n2)^(-1/2); it cancels in every Bayes factor.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .data import BayesFactorResult, DeltaInterval, GroupStats, PriorSpec
from .errors import DomainError
from .specfun import _log_2f1, log_beta, log_gamma, log_integrate

# sample sizes for which the data cannot discriminate the hypotheses
UNINFORMATIVE_TOTAL = 3


def _check_pair(g1: GroupStats, g2: GroupStats) -> None:
    for g in (g1, g2):
        if not isinstance(g, GroupStats):
            raise DomainError(f"expected GroupStats, got {type(g).__name__}")
        if g.pooled != 1:
            raise DomainError("two-sample formulas take unpooled groups")
        if g.n >= 2 and g.ss == 0:
            raise DomainError("a group with n >= 2 has zero spread; the Bayes factor is not defined")
    if g1.n + g2.n < UNINFORMATIVE_TOTAL:
        raise DomainError("need n1 + n2 >= 3 for a proper marginal likelihood")


def _log_constant(g1: GroupStats, g2: GroupStats) -> float:
    n = g1.n + g2.n
    return (2 - n) / 2 * math.log(math.pi) + log_gamma((n - 2) / 2) - 0.5 * math.log(g1.n * g2.n)


def log_ml_h0(g1: GroupStats, g2: GroupStats) -> float:
    """log marginal likelihood under equal variances."""
    _check_pair(g1, g2)
    n = g1.n + g2.n
    return _log_constant(g1, g2) + (2 - n) / 2 * math.log(g1.ss + g2.ss)


def log_ml_h1(g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()) -> float:
    """log marginal likelihood under unequal variances, via 2F1.

    Labels are swapped so that group 1 has the smaller sum of squares, which
    keeps the hypergeometric argument in [0, 1).
    """
    _check_pair(g1, g2)
    if g1.ss > g2.ss:
        g1, g2, prior = g2, g1, prior.swapped()
    n = g1.n + g2.n
    a = (n - 2) / 2
    b = (g1.n - 1) / 2 + prior.alpha1
    c = a + prior.alpha1 + prior.alpha2
    ratio = g1.ss / g2.ss
    return (
        _log_constant(g1, g2)
        - log_beta(prior.alpha1, prior.alpha2)
        + log_beta(b, c - b)
        + _log_2f1(a, b, c, 1.0 - ratio, ratio)
        - a * math.log(g2.ss)
    )


def log_bf10(g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()) -> BayesFactorResult:
    """Bayes factor for unequal versus equal variances."""
    if g1.n + g2.n < UNINFORMATIVE_TOTAL:
        # predictively matched: both hypotheses predict the data identically
        return BayesFactorResult(0.0, "closed_form")
    _check_pair(g1, g2)
    if g1.ss > g2.ss:
        g1, g2, prior = g2, g1, prior.swapped()
    n = g1.n + g2.n
    a = (n - 2) / 2
    b = (g1.n - 1) / 2 + prior.alpha1
    c = a + prior.alpha1 + prior.alpha2
    ratio = g1.ss / g2.ss
    log_bf = (
        log_beta(b, c - b)
        - log_beta(prior.alpha1, prior.alpha2)
        + _log_2f1(a, b, c, 1.0 - ratio, ratio)
        + a * math.log1p(ratio)
    )
    return BayesFactorResult(float(log_bf), "closed_form")


def _log_kernel_logit(t, g1: GroupStats, g2: GroupStats, prior: PriorSpec):
    """log of h(d|rho) pi(rho) rho (1-rho) / h(d|1/2) at rho = expit(t).

    Integrating exp of this over the real line gives the Bayes factor
    against equal variances.
    """
    n = g1.n + g2.n
    a = (n - 2) / 2
    total = g1.ss + g2.ss
    lr = -np.logaddexp(0.0, -t)
    l1r = -np.logaddexp(0.0, t)
    with np.errstate(divide="ignore"):
        lr1, lr2 = math.log(g1.ss / total) if g1.ss > 0 else -np.inf, math.log(g2.ss / total) if g2.ss > 0 else -np.inf
    mix = np.logaddexp(lr + lr1, l1r + lr2) + math.log(2.0)
    return (
        ((g1.n - 1) / 2 + prior.alpha1) * lr
        + ((g2.n - 1) / 2 + prior.alpha2) * l1r
        + (g1.n - 1) / 2 * math.log(2.0)
        + (g2.n - 1) / 2 * math.log(2.0)
        - a * mix
        - log_beta(prior.alpha1, prior.alpha2)
    )


def logit_of_delta(d: float) -> float:
    """logit(rho) for the sd ratio d, since rho / (1 - rho) = d^2."""
    if d == 0:
        return -math.inf
    if math.isinf(d):
        return math.inf
    return 2.0 * math.log(d)


def log_delta_mass(interval: DeltaInterval, prior: PriorSpec = PriorSpec()) -> float:
    """log prior probability that delta falls in ``interval``."""
    a1, a2 = prior.alpha1, prior.alpha2

    def cdf_and_sf(d):
        if d == 0:
            return 0.0, 1.0
        if math.isinf(d):
            return 1.0, 0.0
        rho = d * d / (1 + d * d)
        one_minus = 1 / (1 + d * d)
        return special.betainc(a1, a2, rho), special.betainc(a2, a1, one_minus)

    c_lo, s_lo = cdf_and_sf(interval.lo)
    c_hi, s_hi = cdf_and_sf(interval.hi)
    # subtract the smaller tails to keep precision
    mass = s_lo - s_hi if c_lo > 0.5 else c_hi - c_lo
    if not mass > 0:
        raise DomainError(f"interval [{interval.lo}, {interval.hi}] has zero prior mass")
    return math.log(mass)


def log_ml_ratio_interval(
    interval: DeltaInterval | None, g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()
) -> float:
    """log marginal likelihood of delta restricted to ``interval``, relative to H0.

    ``None`` stands for the point hypothesis delta = 1 and gives 0.
    """
    if interval is None:
        return 0.0
    _check_pair(g1, g2)
    lo, hi = logit_of_delta(interval.lo), logit_of_delta(interval.hi)
    log_int = log_integrate(lambda t: _log_kernel_logit(t, g1, g2, prior), lo, hi)
    return log_int - log_delta_mass(interval, prior)


def log_bf_directed(
    g1: GroupStats,
    g2: GroupStats,
    prior: PriorSpec,
    numerator: DeltaInterval | None,
    denominator: DeltaInterval | None = None,
) -> BayesFactorResult:
    """Bayes factor between two hypotheses about delta.

    Each side is either ``None`` (delta = 1 exactly) or an interval on which
    the Beta prior is truncated and renormalized.
    """
    if numerator is not None and denominator is not None and numerator != denominator:
        if numerator.overlaps(denominator):
            raise DomainError("interval hypotheses must not overlap except at endpoints")
    if g1.n + g2.n < UNINFORMATIVE_TOTAL:
        return BayesFactorResult(0.0, "quadrature")
    value = log_ml_ratio_interval(numerator, g1, g2, prior) - log_ml_ratio_interval(denominator, g1, g2, prior)
    return BayesFactorResult(float(value), "quadrature")


def _log_post_rho_normalizer(g1: GroupStats, g2: GroupStats, prior: PriorSpec) -> float:
    """log of int rho^(b-1) (1-rho)^(c-b-1) (rho ss1 + (1-rho) ss2)^(-a) d rho."""
    n = g1.n + g2.n
    a = (n - 2) / 2
    b = (g1.n - 1) / 2 + prior.alpha1
    c = a + prior.alpha1 + prior.alpha2
    if g1.ss <= g2.ss:
        ratio = g1.ss / g2.ss
        return log_beta(b, c - b) + _log_2f1(a, b, c, 1 - ratio, ratio) - a * math.log(g2.ss)
    ratio = g2.ss / g1.ss
    return log_beta(c - b, b) + _log_2f1(a, c - b, c, 1 - ratio, ratio) - a * math.log(g1.ss)


def posterior_rho_pdf(rho, g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()):
    """Posterior density of rho, the precision weight of group 1."""
    _check_pair(g1, g2)
    r = np.asarray(rho, dtype=float)
    if np.any((r < 0) | (r > 1)) or np.any(np.isnan(r)):
        raise DomainError("rho must lie in [0, 1]")
    n = g1.n + g2.n
    a = (n - 2) / 2
    e1 = (g1.n - 1) / 2 + prior.alpha1 - 1
    e2 = (g2.n - 1) / 2 + prior.alpha2 - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (
            special.xlogy(e1, r)
            + special.xlog1py(e2, -r)
            - a * np.log(r * g1.ss + (1 - r) * g2.ss)
            - _log_post_rho_normalizer(g1, g2, prior)
        )
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def posterior_delta_pdf(delta, g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()):
    """Posterior density of delta = sigma_2 / sigma_1."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("delta must be positive")
    d2 = d * d
    rho = d2 / (1 + d2)
    jac = 2 * d / (1 + d2) ** 2
    out = np.asarray(posterior_rho_pdf(rho, g1, g2, prior)) * jac
    return float(out) if out.ndim == 0 else out


def prior_delta_pdf(delta, prior: PriorSpec = PriorSpec()):
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("delta must be positive")
    logp = (
        math.log(2.0)
        + (2 * prior.alpha1 - 1) * np.log(d)
        - (prior.alpha1 + prior.alpha2) * np.log1p(d * d)
        - log_beta(prior.alpha1, prior.alpha2)
    )
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def joint_posterior_pdf(rho, tau, g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec()):
    """Joint posterior density of (rho, tau), where tau_1 = 2 rho tau."""
    _check_pair(g1, g2)
    r = np.asarray(rho, dtype=float)
    t = np.asarray(tau, dtype=float)
    if np.any((r <= 0) | (r >= 1)) or np.any(~(t > 0)):
        raise DomainError("need 0 < rho < 1 and tau > 0")
    n = g1.n + g2.n
    a = (n - 2) / 2
    e1 = (g1.n - 1) / 2 + prior.alpha1 - 1
    e2 = (g2.n - 1) / 2 + prior.alpha2 - 1
    logp = (
        (a - 1) * np.log(t)
        + e1 * np.log(r)
        + e2 * np.log1p(-r)
        - t * (r * g1.ss + (1 - r) * g2.ss)
        - log_gamma(a)
        - _log_post_rho_normalizer(g1, g2, prior)
    )
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def jeffreys_bf01_1939(g1: GroupStats, g2: GroupStats) -> float:
    """Jeffreys's approximate Bayes factor for equal variances.

    Uses z = ln(s1/s2) with unbiased standard deviations.
    """
    for g in (g1, g2):
        if g.n < 2 or g.ss <= 0:
            raise DomainError("each group needs n >= 2 and positive spread")
    big_n = g1.n + g2.n
    m1, m2 = g1.n - 1, g2.n - 1
    z = 0.5 * math.log((g1.ss / m1) / (g2.ss / m2))
    log_bf = (
        1.5 * math.log(big_n - 2)
        - math.log(2.0)
        - 0.5 * math.log(math.pi * m1 * m2)
        + 2 * (g2.n - g1.n) / (big_n - 2) * z
        - m1 * m2 / (big_n - 2) * z * z
    )
    return math.exp(log_bf)
