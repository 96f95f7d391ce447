"""Independent oracles, simulation, and the desiderata checks.

The oracles code their integrands from scratch and use different numerical
machinery from the implementations they check: mpmath tanh-sinh quadrature
for one-dimensional integrals and scipy's adaptive QUADPACK for the
two-dimensional simplex integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
from scipy import integrate, optimize

from .data import GroupStats, PriorSpec
from .errors import DomainError, NumericError


# ------------------------------------------------------------ 1-d oracles


def _peak_points(lo, hi, mode, width, steps=(-60, -20, -8, -3, 0, 3, 8, 20, 60)):
    pts = {lo, hi}
    for s in steps:
        x = mode + s * width
        if lo < x < hi:
            pts.add(x)
    return sorted(pts)


def _mp_bisect(f, lo, hi, iters=300):
    """Root of a decreasing function on (lo, hi)."""
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def mp_log_euler_2f1(a, b, c, z, dps: int = 30) -> float:
    """ln 2F1 from its Euler integral, in arbitrary precision."""
    with mp.workdps(dps):
        a, b, c, z = (mp.mpf(v) for v in (a, b, c, z))

        def logf(r):
            return (b - 1) * mp.log(r) + (c - b - 1) * mp.log(1 - r) - a * mp.log(1 - z * r)

        # stationary point of the integrand times r(1-r)
        tiny = mp.mpf(10) ** (-dps + 2)
        mode = _mp_bisect(lambda r: b / r - (c - b) / (1 - r) + a * z / (1 - z * r), tiny, 1 - tiny)
        width = mp.sqrt(mode * (1 - mode) / (b + c))
        peak = logf(mode)
        val = mp.quad(lambda r: mp.exp(logf(r) - peak), _peak_points(mp.mpf(0), mp.mpf(1), mode, width))
        return float(peak + mp.log(val) - (mp.loggamma(b) + mp.loggamma(c - b) - mp.loggamma(c)))


def mp_log_tricomi_u(a, b, z, dps: int = 30) -> float:
    """ln U(a, b, z) from its integral representation, in arbitrary precision."""
    with mp.workdps(dps):
        a, b, z = (mp.mpf(v) for v in (a, b, z))

        def logf(t):
            return (a - 1) * mp.log(t) + (b - a - 1) * mp.log1p(t) - z * t

        u = _mp_bisect(lambda u: a + (b - a - 1) * mp.exp(u) / (1 + mp.exp(u)) - z * mp.exp(u), mp.mpf(-300), mp.mpf(300))
        mode = mp.exp(u)
        width = mode / mp.sqrt(a + 1)
        pts = _peak_points(mp.mpf(0), mp.inf, mode, width)
        pts.insert(-1, 50 * mode + 100 / z)
        peak = logf(mode) if a >= 1 else mp.mpf(0)
        val = mp.quad(lambda t: mp.exp(logf(t) - peak), sorted(set(pts)))
        return float(peak + mp.log(val) - mp.loggamma(a))


def quad_ml_two(g1: GroupStats, g2: GroupStats, prior: PriorSpec = PriorSpec(), dps: int = 30) -> float:
    """log marginal likelihood under unequal variances by direct quadrature in rho."""
    n = g1.n + g2.n
    if n < 3 or g1.ss + g2.ss <= 0:
        raise DomainError("degenerate two-sample input")
    with mp.workdps(dps):
        a1, a2 = mp.mpf(prior.alpha1), mp.mpf(prior.alpha2)
        s1, s2 = mp.mpf(g1.ss), mp.mpf(g2.ss)
        e1 = mp.mpf(g1.n - 1) / 2 + a1 - 1
        e2 = mp.mpf(g2.n - 1) / 2 + a2 - 1
        h = mp.mpf(n - 2) / 2

        def logf(r):
            return e1 * mp.log(r) + e2 * mp.log(1 - r) - h * mp.log(r * s1 + (1 - r) * s2)

        tiny = mp.mpf(10) ** (-dps + 2)
        # mode of the integrand times r(1-r)
        mode = _mp_bisect(lambda r: (e1 + 1) / r - (e2 + 1) / (1 - r) - h * (s1 - s2) / (r * s1 + (1 - r) * s2), tiny, 1 - tiny)
        width = mp.sqrt(mode * (1 - mode) / (n + 2))
        peak = logf(mode)
        val, err = mp.quad(lambda r: mp.exp(logf(r) - peak), _peak_points(mp.mpf(0), mp.mpf(1), mode, width), error=True)
        if not err < mp.mpf(10) ** (-12) * val:
            raise NumericError("oracle quadrature did not converge", error=float(err))
        const = (
            mp.mpf(2 - n) / 2 * mp.log(mp.pi)
            + mp.loggamma(mp.mpf(n - 2) / 2)
            - mp.log(g1.n * g2.n) / 2
            - (mp.loggamma(a1) + mp.loggamma(a2) - mp.loggamma(a1 + a2))
        )
        return float(const + peak + mp.log(val))


def quad_ml_k3(stats: Sequence[GroupStats], alpha: float = 0.5) -> float:
    """log marginal likelihood of the three-group model by 2-d adaptive quadrature.

    Integrates over additive log-ratio coordinates (log rho_1/rho_3,
    log rho_2/rho_3) on a box around the mode.
    """
    if len(stats) != 3:
        raise DomainError("quad_ml_k3 takes exactly three groups")
    ns = np.array([g.n for g in stats], dtype=float)
    ss = np.array([g.ss for g in stats], dtype=float)
    dfs = np.array([g.n - g.pooled for g in stats], dtype=float)
    k = sum(g.pooled for g in stats)
    n = ns.sum()
    ex = dfs / 2 + alpha  # includes the ALR Jacobian prod(rho)

    def logf(u, v):
        m = max(u, v, 0.0)
        lz = m + math.log(math.exp(u - m) + math.exp(v - m) + math.exp(-m))
        lr = (u - lz, v - lz, -lz)
        mix = sum(math.exp(lr[i]) * ss[i] for i in range(3))
        return sum(ex[i] * lr[i] for i in range(3)) + (k - n) / 2 * math.log(mix)

    res = optimize.minimize(lambda x: -logf(*x), np.zeros(2), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
    mu = res.x
    peak = logf(*mu)
    eps = 1e-4
    hess = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            di = np.eye(2)[i] * eps
            dj = np.eye(2)[j] * eps
            hess[i, j] = (logf(*(mu + di + dj)) - logf(*(mu + di - dj)) - logf(*(mu - di + dj)) + logf(*(mu - di - dj))) / (4 * eps * eps)
    sd = np.sqrt(np.diag(np.linalg.inv(-hess)))
    half = 14 * sd + 1e-3
    # widen the box until its edges are negligible; weakly identified
    # directions decay only like exp(-alpha |u|)
    for _ in range(40):
        edge = max(
            logf(mu[0] + sx * half[0], mu[1] + sy * half[1])
            for sx in (-1, 0, 1) for sy in (-1, 0, 1) if sx or sy
        )
        if edge < peak - 40:
            break
        half *= 1.5
    val, err = integrate.dblquad(
        lambda v, u: math.exp(logf(u, v) - peak),
        mu[0] - half[0], mu[0] + half[0],
        mu[1] - half[1], mu[1] + half[1],
        epsabs=0.0, epsrel=1e-9,
    )
    if not (val > 0 and err < 1e-6 * val):
        raise NumericError("simplex quadrature did not converge", value=val, error=err)
    const = (
        (k - n) / 2 * math.log(math.pi)
        + math.lgamma((n - k) / 2)
        - 0.5 * float(np.sum(np.log(ns)))
        + math.lgamma(3 * alpha)
        - 3 * math.lgamma(alpha)
    )
    return const + peak + math.log(val)


# ------------------------------------------------------------ simulation


@dataclass(frozen=True)
class SimulationScenario:
    k: int
    taus: tuple[float, ...]
    ns: tuple[int, ...]
    replications: int
    seed: int = 0

    def __post_init__(self):
        if len(self.taus) != self.k or len(self.ns) != self.k:
            raise DomainError("need one precision and one sample size per group")
        if any(not t > 0 for t in self.taus) or any(n < 1 for n in self.ns):
            raise DomainError("precisions must be positive and sample sizes >= 1")
        if self.replications < 1:
            raise DomainError("need at least one replication")


def simulate(scenario: SimulationScenario) -> list[list[GroupStats]]:
    """Gaussian samples (mean 0) reduced to group statistics, one list per replication."""
    streams = np.random.SeedSequence(scenario.seed).spawn(scenario.replications)
    out = []
    for s in streams:
        rng = np.random.default_rng(s)
        reps = []
        for tau, n in zip(scenario.taus, scenario.ns):
            x = rng.normal(0.0, 1.0 / math.sqrt(tau), size=n)
            reps.append(GroupStats.from_values(x))
        out.append(reps)
    return out


# ------------------------------------------------------------ desiderata


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class DesiderataReport:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(PropertyCheck(name, bool(passed), detail))

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _run(report: DesiderataReport, name: str, fn: Callable[[], tuple[bool, str]]) -> None:
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed property, not a crashed suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    report.add(name, ok, detail)


def check_predictive_matching() -> tuple[bool, str]:
    from .two_sample import log_bf10

    vals = [
        log_bf10(GroupStats(1, 0), GroupStats(1, 0)).log_bf,
        log_bf10(GroupStats(2, 3.7), GroupStats(1, 0)).log_bf,
        log_bf10(GroupStats(1, 0), GroupStats(2, 0.2)).log_bf,
    ]
    return all(v == 0.0 for v in vals), f"log BF for (1,1),(2,1),(1,2): {vals}"


def check_label_invariance(seed: int = 11) -> tuple[bool, str]:
    from .two_sample import log_bf10

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        n1, n2 = rng.integers(2, 400, size=2)
        g1 = GroupStats(int(n1), float(rng.uniform(0.1, 50) * n1))
        g2 = GroupStats(int(n2), float(rng.uniform(0.1, 50) * n2))
        a = float(rng.uniform(0.1, 5))
        p = PriorSpec(a)
        worst = max(worst, abs(log_bf10(g1, g2, p).log_bf - log_bf10(g2, g1, p).log_bf))
    return worst <= 1e-10, f"max |difference| after swapping groups: {worst:.2e}"


def check_measurement_invariance(seed: int = 12) -> tuple[bool, str]:
    from .two_sample import log_bf10

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        n1, n2 = rng.integers(2, 400, size=2)
        g1 = GroupStats(int(n1), float(rng.uniform(0.1, 50) * n1))
        g2 = GroupStats(int(n2), float(rng.uniform(0.1, 50) * n2))
        c = float(10 ** rng.uniform(-6, 6))
        p = PriorSpec(float(rng.uniform(0.1, 5)))
        base = log_bf10(g1, g2, p).log_bf
        scaled = log_bf10(GroupStats(g1.n, g1.ss * c), GroupStats(g2.n, g2.ss * c), p).log_bf
        worst = max(worst, abs(base - scaled))
    return worst <= 1e-10, f"max |difference| after rescaling: {worst:.2e}"


def check_information_consistency() -> tuple[bool, str]:
    from .two_sample import log_bf10

    ratios = [10.0 ** -e for e in range(1, 9)]
    vals = [-log_bf10(GroupStats(2, r), GroupStats(2, 1.0), PriorSpec(0.5)).log_bf for r in ratios]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    return decreasing and vals[-1] < vals[0], "log BF01 along ss1/ss2 = 1e-1..1e-8: " + ", ".join(f"{v:.3f}" for v in vals)


def check_limit_consistency() -> tuple[bool, str]:
    from .one_sample import OneSampleProblem, log_bf10_one
    from .two_sample import log_bf10

    g1 = GroupStats(50, 49 * 1.7)
    s2 = 1.3
    a = log_bf10(g1, GroupStats(10**6, (10**6 - 1) * s2 * s2)).log_bf
    b = log_bf10(g1, GroupStats(10**7, (10**7 - 1) * s2 * s2)).log_bf
    one = log_bf10_one(OneSampleProblem(50, 49 * 1.7, 1 / (s2 * s2)), 0.5).log_bf
    ok = abs(a - b) < 1e-2 and abs(b - one) < 1e-2
    return ok, f"n2=1e6: {a:.6f}, n2=1e7: {b:.6f}, one-sample limit: {one:.6f}"


def check_model_selection(replications: int = 200, seed: int = 2024) -> tuple[bool, str]:
    from .two_sample import log_bf10

    def medians(taus):
        out = []
        for n in (50, 400):
            reps = simulate(SimulationScenario(2, taus, (n, n), replications, seed + n))
            out.append(float(np.median([log_bf10(g1, g2).log_bf for g1, g2 in reps])))
        return out

    null50, null400 = medians((1.0, 1.0))
    alt50, alt400 = medians((1.0, 1.0 / 1.5**2))
    ok = null400 < null50 < 0 and alt400 > alt50 > 0
    return ok, f"H0 medians n=50: {null50:.3f}, n=400: {null400:.3f}; delta=1.5 medians n=50: {alt50:.3f}, n=400: {alt400:.3f}"


def check_jeffreys_agreement(sizes: Sequence[int] = (5, 10, 25, 50, 100, 1000)) -> tuple[bool, str]:
    """Our alpha = 1 Bayes factor approaches the 1939 Laplace approximation.

    Under delta = 1 the absolute gap in log BF shrinks monotonically with n.
    For delta > 1 the approximation error grows like n z^3 while log BF grows
    like n z^2, so the gap is measured relative to max(1, |log BF|) and must
    be smaller at the largest n than at the smallest.
    """
    from .two_sample import jeffreys_bf01_1939, log_bf10

    rows = []
    ok = True
    for delta in (1.0, 1.1, 1.2, 1.3, 1.4, 1.5):
        gaps = []
        for n in sizes:
            g1 = GroupStats(n, n - 1.0)
            g2 = GroupStats(n, (n - 1.0) * delta * delta)
            ours = log_bf10(g1, g2, PriorSpec(1.0)).log_bf
            theirs = -math.log(jeffreys_bf01_1939(g1, g2))
            gap = abs(ours - theirs)
            gaps.append(gap if delta == 1.0 else gap / max(1.0, abs(ours)))
        if delta == 1.0:
            ok &= all(b < a for a, b in zip(gaps, gaps[1:]))
        else:
            ok &= gaps[-1] < gaps[0]
        rows.append(f"delta={delta}: " + "/".join(f"{g:.3f}" for g in gaps))
    return ok, "; ".join(rows)


def desiderata_suite(replications: int = 200, seed: int = 2024) -> DesiderataReport:
    """Run the invariance and consistency checks and collect pass/fail results."""
    report = DesiderataReport()
    _run(report, "predictive matching", check_predictive_matching)
    _run(report, "label invariance", check_label_invariance)
    _run(report, "measurement invariance", check_measurement_invariance)
    _run(report, "information consistency trend", check_information_consistency)
    _run(report, "limit consistency", check_limit_consistency)
    _run(report, "model selection consistency", lambda: check_model_selection(replications, seed))
    _run(report, "agreement with the 1939 approximation", check_jeffreys_agreement)
    return report
