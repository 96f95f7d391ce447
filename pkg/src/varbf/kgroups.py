"""Bayes factors among equality and order hypotheses for K groups.

The precisions are tau_k = K rho_k tau with rho on the simplex under a
symmetric Dirichlet(alpha) prior. Equality blocks are pooled into single
groups, the unconstrained block model's marginal likelihood is estimated by
bridge sampling from Metropolis draws, and order constraints multiply it by
the ratio of posterior to prior probability of the order.

All marginal likelihoods share the constant
pi^((K-n)/2) Gamma((n-K)/2) prod(n_k)^(-1/2), computed from the original
(unpooled) groups, so Bayes factors between any two hypotheses are exact
differences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .data import BayesFactorResult, GroupStats
from .errors import DomainError, NumericError
from .hypotheses import HypothesisSpec, collapse, order_mask

log = logging.getLogger(__name__)

ESS_FLAG_THRESHOLD = 400


@dataclass(frozen=True)
class ChainConfig:
    """Sampler and estimator settings.

    ``draws`` is the number of kept draws per chain; with ``thin > 1`` the
    chain runs ``draws * thin`` post-warmup steps.
    """

    chains: int = 4
    warmup: int = 1000
    draws: int = 5000
    thin: int = 1
    target_accept: float = 0.4
    min_satisfying: int = 50
    max_budget_factor: int = 8
    prior_mc_draws: int = 1_000_000
    bridge_max_iter: int = 1000
    bridge_tol: float = 1e-10

    def __post_init__(self):
        if self.chains < 1 or self.warmup < 20 or self.draws < 20 or self.thin < 1:
            raise DomainError("need chains >= 1, warmup >= 20, draws >= 20 and thin >= 1")
        if not 0 < self.target_accept < 1:
            raise DomainError("target acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class PosteriorDraws:
    """Post-warmup simplex draws pooled over chains, in chain order."""

    draws: np.ndarray = field(repr=False)
    unconstrained: np.ndarray = field(repr=False)  # (chains, draws, K-1)
    seed: int | None
    acceptance_rate: float
    ess_min: float

    @property
    def n_chains(self) -> int:
        return int(self.unconstrained.shape[0])

    @property
    def flagged(self) -> bool:
        return self.ess_min < ESS_FLAG_THRESHOLD

    def by_chain(self) -> np.ndarray:
        c, d, _ = self.unconstrained.shape
        return self.draws.reshape(c, d, -1)


@dataclass(frozen=True)
class BridgeResult:
    log_ml: float
    se: float
    iterations: int


# ------------------------------------------------------------ closed forms


def _check_stats(stats: Sequence[GroupStats], min_groups: int = 2) -> None:
    if len(stats) < min_groups:
        raise DomainError(f"need at least {min_groups} groups")
    for g in stats:
        if not isinstance(g, GroupStats):
            raise DomainError(f"expected GroupStats, got {type(g).__name__}")
        if g.df >= 1 and g.ss == 0:
            raise DomainError("a group with replicated observations has zero spread")
    k = sum(g.pooled for g in stats)
    n = sum(g.n for g in stats)
    if n < k + 1:
        raise DomainError("need more observations than groups")
    if sum(g.ss for g in stats) <= 0:
        raise DomainError("total sum of squares must be positive")


def log_ml_constant(stats: Sequence[GroupStats]) -> float:
    """Convention constant shared by every hypothesis on these data."""
    k = sum(g.pooled for g in stats)
    n = sum(g.n for g in stats)
    return (k - n) / 2 * math.log(math.pi) + special.gammaln((n - k) / 2) - 0.5 * sum(math.log(g.n) for g in stats)


def log_ml_h0_k(stats: Sequence[GroupStats]) -> float:
    """log marginal likelihood when all groups share one variance."""
    _check_stats(stats)
    k = sum(g.pooled for g in stats)
    n = sum(g.n for g in stats)
    return log_ml_constant(stats) + (k - n) / 2 * math.log(sum(g.ss for g in stats))


def _log_dirichlet_norm(m: int, alpha: float) -> float:
    return float(special.gammaln(m * alpha) - m * special.gammaln(alpha))


def _log_kernel(log_rho: np.ndarray, stats: Sequence[GroupStats], alpha: float) -> np.ndarray:
    """Dirichlet-weighted likelihood kernel at log weights, without constants."""
    df = np.array([g.df for g in stats], dtype=float)
    with np.errstate(divide="ignore"):
        log_ss = np.log(np.array([g.ss for g in stats], dtype=float))
    k = sum(g.pooled for g in stats)
    n = sum(g.n for g in stats)
    lin = log_rho @ (df / 2 + alpha - 1)
    mix = special.logsumexp(log_rho + log_ss, axis=-1)
    return lin + (k - n) / 2 * mix


def unnorm_log_post(rho, stats: Sequence[GroupStats], alpha: float):
    """log of prior density times likelihood at simplex point(s) ``rho``.

    Integrates over the simplex to the marginal likelihood of the model in
    which each entry of ``stats`` has its own variance.
    """
    _check_stats(stats, min_groups=1)
    r = np.asarray(rho, dtype=float)
    if r.shape[-1] != len(stats):
        raise DomainError(f"expected {len(stats)} weights, got {r.shape[-1]}")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(r)
        out = _log_kernel(log_r, stats, alpha) + _log_dirichlet_norm(len(stats), alpha) + log_ml_constant(stats)
    out = np.where(np.all(r > 0, axis=-1), out, -np.inf)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------ simplex transform


def _offsets(dim: int) -> np.ndarray:
    # centre the unconstrained origin on the uniform weight vector
    return np.log(dim - np.arange(dim, dtype=float))


def stick_breaking(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map unconstrained y (..., K-1) to (log rho (..., K), log |Jacobian|)."""
    y = np.asarray(y, dtype=float)
    x = y - _offsets(y.shape[-1])
    lz = -np.logaddexp(0.0, -x)
    l1z = -np.logaddexp(0.0, x)
    log_rem = np.concatenate([np.zeros(y.shape[:-1] + (1,)), np.cumsum(l1z, axis=-1)], axis=-1)
    log_rho = np.concatenate([lz + log_rem[..., :-1], log_rem[..., -1:]], axis=-1)
    log_jac = np.sum(lz + l1z + log_rem[..., :-1], axis=-1)
    return log_rho, log_jac


def inverse_stick_breaking(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    rem = 1.0 - np.concatenate([np.zeros(rho.shape[:-1] + (1,)), np.cumsum(rho[..., :-1], axis=-1)], axis=-1)
    z = rho[..., :-1] / rem[..., :-1]
    return special.logit(z) + _offsets(rho.shape[-1] - 1)


class _Target:
    """log posterior density in unconstrained coordinates, constants included."""

    def __init__(self, stats: Sequence[GroupStats], alpha: float):
        self.stats = list(stats)
        self.alpha = alpha
        self.dim = len(stats) - 1
        self.const = _log_dirichlet_norm(len(stats), alpha) + log_ml_constant(stats)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        log_rho, log_jac = stick_breaking(y)
        return _log_kernel(log_rho, self.stats, self.alpha) + log_jac + self.const


# ------------------------------------------------------------ diagnostics


def effective_sample_size(x: np.ndarray) -> float:
    """Multi-chain effective sample size with Geyer's monotone sequence.

    ``x`` has shape (chains, draws).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    c, n = x.shape
    if n < 4:
        return float(c * n)
    xc = x - x.mean(axis=1, keepdims=True)
    f = np.fft.rfft(xc, n=2 * n, axis=1)
    acov = np.fft.irfft(f * np.conj(f), n=2 * n, axis=1)[:, :n] / n
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    b_over_n = x.mean(axis=1).var(ddof=1) if c > 1 else 0.0
    var_plus = w * (n - 1) / n + b_over_n
    if not var_plus > 0:
        return float(c * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    positive = np.nonzero(pairs <= 0)[0]
    m = positive[0] if positive.size else pairs.size
    pairs = np.minimum.accumulate(pairs[:m]) if m else pairs[:1]
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / math.log10(c * n + 10))
    return float(c * n / tau)


# ------------------------------------------------------------ sampling


def _find_mode(target: _Target) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mode in unconstrained space and marginal sds from the Hessian."""
    d = target.dim
    res = optimize.minimize(lambda y: -float(target(y)), np.zeros(d), method="BFGS", options={"gtol": 1e-8})
    mode = res.x
    h = 1e-4
    hess = np.empty((d, d))
    f0 = float(target(mode))
    for i in range(d):
        for j in range(i, d):
            ei = np.eye(d)[i] * h
            ej = np.eye(d)[j] * h
            val = (
                float(target(mode + ei + ej)) - float(target(mode + ei - ej))
                - float(target(mode - ei + ej)) + float(target(mode - ei - ej))
            ) / (4 * h * h)
            hess[i, j] = hess[j, i] = val
    try:
        cov = np.linalg.inv(-hess)
        sd = np.sqrt(np.diag(cov))
        if not np.all(np.isfinite(sd)) or np.any(sd <= 0):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sd = np.full(d, 0.1)
    if not math.isfinite(f0):
        raise NumericError("posterior mode search failed", mode=mode.tolist())
    return mode, sd


def sample_posterior(
    stats: Sequence[GroupStats], alpha: float, config: ChainConfig = ChainConfig(), seed: int | None = 0
) -> PosteriorDraws:
    """Adaptive random-walk Metropolis on stick-breaking coordinates.

    Chains start near the posterior mode. During warmup each chain tunes a
    global step size toward ``config.target_accept`` and re-estimates
    per-coordinate scales from two windows of its own history; the kernel is
    fixed afterwards. Each chain draws from its own stream spawned from
    ``seed``, so results do not depend on evaluation order.
    """
    _check_stats(stats)
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"prior shape must be positive, got {alpha!r}")
    target = _Target(stats, alpha)
    d = target.dim
    c = config.chains
    steps = config.warmup + config.draws * config.thin

    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(c)]
    mode, sd0 = _find_mode(target)
    y = np.stack([mode + 0.5 * sd0 * r.standard_normal(d) for r in rngs])
    noise = np.stack([r.standard_normal((steps, d)) for r in rngs], axis=1)
    log_u = np.stack([np.log(r.random(steps)) for r in rngs], axis=1)

    lp = target(y)
    scale = np.tile(sd0, (c, 1))
    log_lam = np.full(c, math.log(2.38 / math.sqrt(d)))
    w = config.warmup
    windows = (int(0.15 * w), int(0.45 * w), int(0.8 * w))
    history = np.empty((w, c, d))
    reset_at = 0
    kept = np.empty((c, config.draws, d))
    accepted = 0
    for t in range(steps):
        prop = y + (np.exp(log_lam)[:, None] * scale) * noise[t]
        lp_prop = target(prop)
        log_ratio = lp_prop - lp
        accept = log_u[t] < log_ratio
        y = np.where(accept[:, None], prop, y)
        lp = np.where(accept, lp_prop, lp)
        if t < w:
            history[t] = y
            acc_prob = np.exp(np.minimum(log_ratio, 0.0))
            acc_prob = np.where(np.isnan(acc_prob), 0.0, acc_prob)
            log_lam += (acc_prob - config.target_accept) / (t - reset_at + 1) ** 0.6
            if t + 1 in windows[1:]:
                start = windows[0] if t + 1 == windows[1] else windows[1]
                scale = history[start : t + 1].std(axis=0) + 1e-12
                log_lam[:] = math.log(2.38 / math.sqrt(d))
                reset_at = t + 1
        else:
            accepted += int(accept.sum())
            i = t - w
            if i % config.thin == config.thin - 1:
                kept[:, i // config.thin] = y

    log_rho, _ = stick_breaking(kept)
    rho = np.exp(log_rho)
    rho /= rho.sum(axis=-1, keepdims=True)
    ess = min(effective_sample_size(rho[:, :, j]) for j in range(rho.shape[-1]))
    rate = accepted / (c * config.draws * config.thin)
    draws = PosteriorDraws(rho.reshape(-1, d + 1), kept, seed, rate, ess)
    if draws.flagged:
        log.warning("posterior sampler reached only %.0f effective draws", ess)
    return draws


def sample_prior(k: int, alpha: float, n_draws: int, seed: int | None = 0) -> np.ndarray:
    """Dirichlet(alpha, ..., alpha) draws from normalized Gamma variates."""
    if k < 2:
        raise DomainError("need k >= 2")
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"prior shape must be positive, got {alpha!r}")
    if n_draws < 1:
        raise DomainError("need at least one draw")
    g = np.random.default_rng(seed).gamma(alpha, size=(n_draws, k))
    return g / g.sum(axis=1, keepdims=True)


# ------------------------------------------------------------ bridge sampling


def _mvn_logpdf(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    z = np.linalg.solve(chol, (x - mean).T).T
    d = mean.size
    return -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(np.diag(chol))) - 0.5 * d * math.log(2 * math.pi)


def _logmeanexp(x: np.ndarray) -> float:
    return float(special.logsumexp(x) - math.log(x.size))


def bridge_log_ml(
    draws: PosteriorDraws, stats: Sequence[GroupStats], alpha: float, config: ChainConfig = ChainConfig()
) -> BridgeResult:
    """Marginal likelihood by the iterative optimal bridge estimator.

    The first half of every chain fits a Gaussian proposal in unconstrained
    coordinates; the second half enters the iteration. The standard error is
    the usual first-order approximation, with the autocorrelation of the
    posterior-side terms taken into account.
    """
    target = _Target(stats, alpha)
    post = draws.unconstrained
    c, n, d = post.shape
    if d != target.dim:
        raise DomainError("draws do not match the number of groups")
    half = n // 2
    fit = post[:, :half].reshape(-1, d)
    it = post[:, half:]
    n1 = it.shape[0] * it.shape[1]
    n2 = n1
    mean = fit.mean(axis=0)
    cov = np.atleast_2d(np.cov(fit, rowvar=False))
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(d) * np.trace(cov))

    rng = np.random.default_rng(np.random.SeedSequence([0 if draws.seed is None else draws.seed, 2]))
    prop = mean + rng.standard_normal((n2, d)) @ chol.T
    flat = it.reshape(-1, d)
    l1 = target(flat) - _mvn_logpdf(flat, mean, chol)
    l2 = target(prop) - _mvn_logpdf(prop, mean, chol)
    if not np.all(np.isfinite(l1)):
        raise NumericError("posterior draws have non-finite density", bad=int(np.sum(~np.isfinite(l1))))
    l2 = np.where(np.isnan(l2), -np.inf, l2)

    neff = float(np.median([effective_sample_size(it[:, :, j]) for j in range(d)]))
    neff = min(neff, n1)
    log_s1 = math.log(neff / (neff + n2))
    log_s2 = math.log(n2 / (neff + n2))
    lstar = float(np.median(l1))
    a1 = l1 - lstar
    a2 = l2 - lstar
    log_r = 0.0
    for iterations in range(1, config.bridge_max_iter + 1):
        num = _logmeanexp(a2 - np.logaddexp(log_s1 + a2, log_s2 + log_r))
        den = _logmeanexp(-np.logaddexp(log_s1 + a1, log_s2 + log_r))
        new = num - den
        if abs(new - log_r) < config.bridge_tol:
            log_r = new
            break
        log_r = new
    else:
        raise NumericError("bridge sampling did not converge", iterations=config.bridge_max_iter, log_r=log_r)

    lf1 = a2 - np.logaddexp(log_s1 + a2, log_s2 + log_r)
    lf2 = -np.logaddexp(log_s1 + a1, log_s2 + log_r)
    f1 = np.exp(lf1 - lf1.max())
    f2 = np.exp(lf2 - lf2.max())
    f2_chains = f2.reshape(it.shape[0], it.shape[1])
    ess_f2 = effective_sample_size(f2_chains)
    re2 = f1.var() / (n2 * f1.mean() ** 2) + (f2.var() / f2.mean() ** 2) / ess_f2
    return BridgeResult(log_r + lstar, float(math.sqrt(re2)), iterations)


# ------------------------------------------------------------ order constraints


def prior_order_fraction(spec: HypothesisSpec) -> float:
    """Exact prior probability of the order under an exchangeable prior.

    All orderings of the m block weights are equally likely, so the
    probability is (number of linear extensions of the order) / m!.
    """
    m = spec.n_blocks
    if not spec.order:
        return 1.0
    if m > 20:
        raise DomainError("exact order fraction needs at most 20 blocks")
    above = [0] * m
    for i, j in spec.order:
        above[j] |= 1 << i
    ways = [0] * (1 << m)
    ways[0] = 1
    for subset in range(1 << m):
        if not ways[subset]:
            continue
        for b in range(m):
            if not subset >> b & 1 and above[b] & subset == above[b]:
                ways[subset | 1 << b] += ways[subset]
    return ways[-1] / math.factorial(m)


def encompassing_fraction(
    spec: HypothesisSpec, posterior: PosteriorDraws, prior_draws: np.ndarray | None = None
) -> tuple[float, float]:
    """log BF of the order-constrained model against its unconstrained version.

    ``spec`` refers to the weights in ``posterior`` (use the reduced spec
    returned by ``collapse``). The prior fraction is exact unless
    ``prior_draws`` are supplied.
    """
    if spec.k != posterior.draws.shape[1]:
        raise DomainError("hypothesis and draws have different numbers of weights")
    if not spec.order:
        return 0.0, 0.0
    mask = order_mask(posterior.draws, spec)
    count = int(mask.sum())
    total = mask.size
    if prior_draws is None:
        prior_frac, prior_var = prior_order_fraction(spec), 0.0
    else:
        pm = order_mask(np.asarray(prior_draws), spec)
        if not pm.any():
            raise NumericError("no prior draws satisfy the order; use the exact prior fraction", draws=pm.size)
        prior_frac = float(pm.mean())
        prior_var = (1 - prior_frac) / (prior_frac * pm.size)
    if count == 0:
        raise NumericError(
            "no posterior draws satisfy the order; increase the number of draws", draws=total
        )
    p = count / total
    if count < total:
        ess = effective_sample_size(mask.reshape(posterior.n_chains, -1).astype(float))
        ess = min(ess, total)
        post_var = (1 - p) / (p * ess)
    else:
        post_var = 0.0
    return math.log(p) - math.log(prior_frac), math.sqrt(post_var + prior_var)


# ------------------------------------------------------------ hypothesis comparison


@dataclass(frozen=True)
class ModelEvidence:
    """log marginal likelihood of one hypothesis with its Monte Carlo error."""

    log_ml: float
    se: float
    method: str
    flags: tuple[str, ...] = ()
    order_log_bf: float = 0.0
    posterior: PosteriorDraws | None = field(default=None, repr=False, compare=False)


def _partition_seed(seed: int | None, spec: HypothesisSpec) -> np.random.SeedSequence | int | None:
    if seed is None:
        return None
    return int(np.random.SeedSequence([seed, spec.k, *spec.block_of()]).generate_state(1)[0])


class EvidenceCache:
    """Shares posterior runs between hypotheses with the same equality blocks."""

    def __init__(self, stats: Sequence[GroupStats], alpha: float, config: ChainConfig, seed: int | None):
        _check_stats(stats)
        self.stats = list(stats)
        self.alpha = alpha
        self.config = config
        self.seed = seed
        self._unconstrained: dict = {}

    def _block_model(self, spec: HypothesisSpec):
        key = spec.blocks
        if key not in self._unconstrained:
            reduced, _ = collapse(self.stats, spec)
            seed = _partition_seed(self.seed, spec)
            post = sample_posterior(reduced, self.alpha, self.config, seed)
            bridge = bridge_log_ml(post, reduced, self.alpha, self.config)
            shift = log_ml_constant(self.stats) - log_ml_constant(reduced)
            self._unconstrained[key] = (post, bridge, shift, seed)
        return self._unconstrained[key]

    def evidence(self, spec: HypothesisSpec) -> ModelEvidence:
        if spec.k != len(self.stats):
            raise DomainError(f"hypothesis has {spec.k} groups but {len(self.stats)} stats were given")
        if spec.is_null:
            return ModelEvidence(log_ml_h0_k(self.stats), 0.0, "closed_form")
        post, bridge, shift, seed = self._block_model(spec)
        flags = ["low_ess"] if post.flagged else []
        log_ml = bridge.log_ml + shift
        se = bridge.se
        if not spec.order:
            return ModelEvidence(log_ml, se, "bridge_encompassing", tuple(flags), 0.0, post)
        reduced, rspec = collapse(self.stats, spec)
        sample = post
        factor = 1
        while int(order_mask(sample.draws, rspec).sum()) < self.config.min_satisfying:
            if factor >= self.config.max_budget_factor:
                flags.append("few_satisfying_draws")
                break
            factor *= 2
            log.info("order holds in few posterior draws; rerunning with %dx draws", factor)
            cfg = replace(self.config, draws=self.config.draws * factor)
            sample = sample_posterior(reduced, self.alpha, cfg, seed)
        order_bf, order_se = encompassing_fraction(rspec, sample)
        return ModelEvidence(
            log_ml + order_bf, math.hypot(se, order_se), "bridge_encompassing", tuple(flags), order_bf, sample
        )


def log_bf(
    spec_numerator: HypothesisSpec,
    spec_denominator: HypothesisSpec,
    stats: Sequence[GroupStats],
    alpha: float = 0.5,
    config: ChainConfig = ChainConfig(),
    seed: int | None = 0,
    cache: EvidenceCache | None = None,
) -> BayesFactorResult:
    """Bayes factor of one hypothesis against another on the same groups."""
    if spec_numerator.k != spec_denominator.k:
        raise DomainError("hypotheses refer to different numbers of groups")
    cache = cache or EvidenceCache(stats, alpha, config, seed)
    num = cache.evidence(spec_numerator)
    den = cache.evidence(spec_denominator)
    if num.method == den.method == "closed_form":
        return BayesFactorResult(float(num.log_ml - den.log_ml), "closed_form")
    flags = tuple(sorted(set(num.flags) | set(den.flags)))
    return BayesFactorResult(
        float(num.log_ml - den.log_ml), "bridge_encompassing", float(math.hypot(num.se, den.se)), flags
    )
