"""Special functions and quadrature carried in log scale.

The hypergeometric functions that appear in the Bayes factors take
parameters of the order of the sample size, so everything here returns
logarithms and avoids forming probability-scale intermediates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize, special

from .errors import DomainError, NumericError

SERIES_MAX_TERMS = 1_000_000
SERIES_RADIUS = 0.5
# Panels below exp(-TAIL_DROP) of the running total are negligible.
TAIL_DROP = 45.0
PANEL_ORDER = 20
PANEL_GROWTH = 1.4
# each panel is bisected until its error is below this fraction of the total, in log
PANEL_REL_TOL = math.log(1e-15)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in length")

    @property
    def order(self) -> int:
        return int(self.nodes.size)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], lo: float = -1.0, hi: float = 1.0) -> float:
        half = 0.5 * (hi - lo)
        x = 0.5 * (hi + lo) + half * self.nodes
        return float(half * np.dot(self.weights, f(x)))


def _check_finite(**kwargs):
    for name, v in kwargs.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


def log_gamma(x: float) -> float:
    _check_finite(x=x)
    if x <= 0:
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return float(special.gammaln(x))


def log_beta(a: float, b: float) -> float:
    _check_finite(a=a, b=b)
    if a <= 0 or b <= 0:
        raise DomainError(f"log_beta needs positive arguments, got ({a!r}, {b!r})")
    return float(special.betaln(a, b))


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    _check_finite(x=x, a=a, b=b)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"reg_inc_beta needs 0 <= x <= 1, got {x!r}")
    if a <= 0 or b <= 0:
        raise DomainError(f"reg_inc_beta needs positive shapes, got ({a!r}, {b!r})")
    return float(special.betainc(a, b, x))


@lru_cache(maxsize=64)
def _rule(order: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(order)
    # leggauss is symmetric only up to rounding; enforce it exactly
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


def gauss_legendre(order: int) -> QuadratureRule:
    if isinstance(order, bool) or int(order) != order or order < 1:
        raise DomainError(f"quadrature order must be a positive integer, got {order!r}")
    return _rule(int(order))


def _safe_eval(logf, x):
    with np.errstate(all="ignore"):
        y = np.asarray(logf(np.asarray(x, dtype=float)), dtype=float)
    return np.where(np.isnan(y), -np.inf, y)


def _mode(logf, lo: float, hi: float) -> float:
    """Maximizer of a unimodal log-integrand on [lo, hi]."""
    span = 60.0
    while True:
        a = lo if math.isfinite(lo) else -span
        b = hi if math.isfinite(hi) else span
        if math.isfinite(lo) and not math.isfinite(hi):
            b = max(lo + span, span)
        if math.isfinite(hi) and not math.isfinite(lo):
            a = min(hi - span, -span)
        grid = np.linspace(a, b, 481)
        vals = _safe_eval(logf, grid)
        i = int(np.argmax(vals))
        if not np.isfinite(vals[i]):
            raise NumericError("integrand is zero or undefined on the whole scan range", lo=lo, hi=hi)
        at_open_edge = (i == 0 and not math.isfinite(lo)) or (i == grid.size - 1 and not math.isfinite(hi))
        if not at_open_edge or span > 1e5:
            break
        span *= 8.0
    if i in (0, grid.size - 1) and not at_open_edge:
        # mode sits on a finite bound
        neighbour = grid[1] if i == 0 else grid[-2]
        if vals[i] >= _safe_eval(logf, [grid[i] + 1e-9 * (neighbour - grid[i])])[0]:
            return float(grid[i])
    left = grid[max(i - 1, 0)]
    right = grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(
        lambda t: -_safe_eval(logf, [t])[0],
        bounds=(left, right),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(grid[i]))},
    )
    t = float(res.x)
    return t if _safe_eval(logf, [t])[0] >= vals[i] else float(grid[i])


def _local_scale(logf, t: float) -> float:
    """Width of the peak at t from the second (or first) derivative."""
    h = 1e-3
    for _ in range(6):
        y = _safe_eval(logf, [t - h, t, t + h])
        if not np.all(np.isfinite(y)):
            h *= 0.1
            continue
        d2 = (y[0] - 2 * y[1] + y[2]) / (h * h)
        d1 = (y[2] - y[0]) / (2 * h)
        curv = max(-d2, d1 * d1, 1e-12)
        s = 1.0 / math.sqrt(curv)
        if h <= 0.05 * s:
            return min(max(s, 1e-10), 10.0)
        h = 0.02 * s
    return min(max(s if "s" in locals() else 1.0, 1e-10), 10.0)


def _gl_panel(logf, a: float, b: float, rule) -> tuple[float, np.ndarray]:
    half = 0.5 * (b - a)
    y = _safe_eval(logf, 0.5 * (a + b) + half * rule.nodes)
    return float(special.logsumexp(y, b=rule.weights * half)), y


def _refined_panel(logf, a: float, b: float, rule, whole: float, floor: float, depth: int = 12) -> float:
    """Bisect a panel until the two halves agree with the whole to ``floor``."""
    m = 0.5 * (a + b)
    left, _ = _gl_panel(logf, a, m, rule)
    right, _ = _gl_panel(logf, m, b, rule)
    halves = float(np.logaddexp(left, right))
    hi = max(whole, halves)
    if not math.isfinite(hi) or depth == 0:
        return halves
    d = abs(whole - halves)
    err = hi + math.log(-math.expm1(-d)) if d > 0 else -math.inf
    if err < floor:
        return halves
    return float(np.logaddexp(
        _refined_panel(logf, a, m, rule, left, floor, depth - 1),
        _refined_panel(logf, m, b, rule, right, floor, depth - 1),
    ))


def _panels_one_side(logf, start: float, end: float, width: float, direction: int, rule, peak_log: float):
    """Accumulate log-integrals of panels marching away from the peak."""
    out = []
    pos = start
    total = -np.inf
    k = 0
    while True:
        nxt = pos + direction * width
        if (direction > 0 and nxt >= end) or (direction < 0 and nxt <= end):
            nxt = end
        a, b = (pos, nxt) if direction > 0 else (nxt, pos)
        if b > a:
            whole, y = _gl_panel(logf, a, b, rule)
            running = np.logaddexp(total, peak_log)
            contrib = _refined_panel(logf, a, b, rule, whole, running + PANEL_REL_TOL)
            out.append(contrib)
            total = np.logaddexp(total, contrib)
        if nxt == end:
            break
        running = np.logaddexp(total, peak_log)
        k += 1
        if k >= 4 and np.max(y) < running - TAIL_DROP:
            break
        if k > 5000:
            raise NumericError("panel integration failed to reach a negligible tail", start=start)
        pos = nxt
        width *= PANEL_GROWTH
    return out


def log_integrate(logf: Callable[[np.ndarray], np.ndarray], lo: float = -math.inf, hi: float = math.inf) -> float:
    """log of the integral of exp(logf) over [lo, hi].

    ``logf`` must be vectorized and unimodal on the interval. Gauss-Legendre
    panels start at the peak, are as wide as the peak, and grow geometrically
    outward until the tail is negligible. A panel whose halves disagree with
    it is bisected recursively.
    """
    if not lo < hi:
        raise DomainError(f"empty integration range [{lo}, {hi}]")
    rule = gauss_legendre(PANEL_ORDER)
    t0 = _mode(logf, lo, hi)
    peak = float(_safe_eval(logf, [t0])[0])
    s = _local_scale(logf, t0)
    parts = []
    if t0 < hi:
        parts += _panels_one_side(logf, t0, hi, s, +1, rule, peak)
    if t0 > lo:
        parts += _panels_one_side(logf, t0, lo, s, -1, rule, peak)
    if not parts:
        raise NumericError("no quadrature panels produced", lo=lo, hi=hi)
    value = float(special.logsumexp(parts))
    if not math.isfinite(value):
        raise NumericError("integral underflowed or overflowed in log space", lo=lo, hi=hi, peak=peak)
    return value


# ---------------------------------------------------------------- 2F1


def _log_pos_series(p: float, q: float, c: float, log_z: float, max_terms: int) -> float:
    """log of sum_k (p)_k (q)_k / ((c)_k k!) z^k for p, q >= 0, c > 0, 0 < z < 1."""
    if p == 0 or q == 0:
        return 0.0
    total = 0.0
    last = 0.0
    start = 0
    chunk = 256
    while start < max_terms:
        k = np.arange(start, start + chunk, dtype=float)
        log_ratio = np.log(p + k) + np.log(q + k) - np.log(c + k) - np.log1p(k) + log_z
        terms = last + np.cumsum(log_ratio)
        total = float(np.logaddexp(total, special.logsumexp(terms)))
        last = float(terms[-1])
        start += chunk
        if log_ratio[-1] < 0 and last < total - 40.0:
            # remaining tail is bounded by a geometric series with ratio < 1
            return total
        chunk = min(chunk * 2, 65536)
    raise NumericError(
        "hypergeometric series did not converge",
        terms=start, p=p, q=q, c=c, z=math.exp(log_z), last_log_term=last, log_sum=total,
    )


def _series_cost(p: float, q: float, c: float, z: float) -> float:
    """Rough number of terms needed: the peak index plus a geometric tail."""
    # terms grow while (p+k)(q+k) z > (c+k)(k+1)
    A = 1.0 - z
    B = c + 1.0 - (p + q) * z
    C = c - p * q * z
    disc = B * B - 4 * A * C
    kstar = 0.0 if C >= 0 and B >= 0 else max(0.0, (-B + math.sqrt(max(disc, 0.0))) / (2 * A))
    return kstar + 40.0 / -math.log(z)


def _log_euler_integral(a: float, b: float, c: float, z: float, omz: float) -> float:
    """log of int_0^1 r^(b-1) (1-r)^(c-b-1) (1 - z r)^(-a) dr in logit coordinates."""
    log_omz = math.log(omz) if omz > 0 else -math.inf

    def logf(t):
        lr = -np.logaddexp(0.0, -t)  # log r
        l1r = -np.logaddexp(0.0, t)  # log(1 - r)
        if z >= 0:
            # 1 - z r = (1 - r) + (1 - z) r
            lk = np.logaddexp(l1r, log_omz + lr)
        else:
            lk = np.log1p(-z * np.exp(lr))
        return b * lr + (c - b) * l1r - a * lk

    return log_integrate(logf)


def _log_2f1(a: float, b: float, c: float, z: float, omz: float) -> float:
    """ln 2F1 with ``omz = 1 - z`` supplied separately for precision near z = 1."""
    if z == 0 or a == 0:
        return 0.0
    if omz == 0:
        if c - a - b <= 0:
            raise DomainError("2F1 diverges at z = 1 unless c - a - b > 0")
        return log_beta(b, c - a - b) - log_beta(b, c - b)
    if z < 0:
        w = z / (z - 1.0)
        if w <= SERIES_RADIUS:
            # Pfaff: 2F1(a,b;c;z) = (1-z)^(-a) 2F1(a, c-b; c; z/(z-1))
            return -a * math.log(omz) + _log_2f1(a, c - b, c, w, 1.0 / omz)
        return _log_euler_integral(a, b, c, z, omz) - log_beta(b, c - b)
    if z <= SERIES_RADIUS:
        log_z = math.log(z)
        candidates = []
        if a >= 0 and b >= 0:
            candidates.append((_series_cost(a, b, c, z), 0.0, a, b))
        if c - a >= 0 and c - b >= 0:
            candidates.append((_series_cost(c - a, c - b, c, z), (c - a - b) * math.log(omz), c - a, c - b))
        if candidates:
            cost, pre, p, q = min(candidates)
            if cost < SERIES_MAX_TERMS:
                return pre + _log_pos_series(p, q, c, log_z, SERIES_MAX_TERMS)
    return _log_euler_integral(a, b, c, z, omz) - log_beta(b, c - b)


def log_2f1(a: float, b: float, c: float, z: float) -> float:
    """ln of the Gauss hypergeometric function 2F1(a, b; c; z).

    Valid for c > b > 0 and z <= 1, where the Euler integral representation
    holds and the function is positive. For |z| <= 0.5 a positive-term power
    series is summed (after the Euler or Pfaff transformation when that is
    cheaper); elsewhere the Euler integral is integrated numerically in
    logit coordinates. Accuracy is best when c >= a, which makes the
    integrand log-concave.
    """
    _check_finite(a=a, b=b, c=c, z=z)
    if z > 1:
        raise DomainError(f"log_2f1 needs z <= 1, got {z!r}")
    if z == 0:
        return 0.0
    if not (c > 0 and c > b and b > 0):
        raise DomainError(f"log_2f1 needs c > b > 0, got b={b!r}, c={c!r}")
    return _log_2f1(float(a), float(b), float(c), float(z), 1.0 - float(z))


def log_tricomi_u(a: float, b: float, z: float) -> float:
    """ln U(a, b, z) from its integral representation, for a > 0 and z > 0."""
    _check_finite(a=a, b=b, z=z)
    if a <= 0 or z <= 0:
        raise DomainError(f"log_tricomi_u needs a > 0 and z > 0, got a={a!r}, z={z!r}")
    if b == a + 1:
        return -a * math.log(z)

    def logf(u):
        # t = exp(u); integrand t^a (1+t)^(b-a-1) e^(-z t)
        return a * u + (b - a - 1) * np.logaddexp(0.0, u) - z * np.exp(u)

    return log_integrate(logf) - log_gamma(a)
