"""Command-line interface: one-, two- and K-sample variance tests.

Every run prints a single JSON report. Exit codes: 0 on success, 2 for
invalid input, 3 when a numerical routine fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

from . import __version__
from .data import SD_DIVISORS, DeltaInterval, GroupStats, PriorSpec
from .elicitation import ElicitationTarget, delta_interval_prob, solve_alpha
from .errors import DomainError, NumericError, ValidationError, VarBFError
from .hypotheses import SCALES, format_hypothesis, parse_hypothesis
from .kgroups import ChainConfig, EvidenceCache, log_bf
from .one_sample import OneSampleProblem, log_bf10_one, log_bf_directed_one, posterior_delta_pdf_one
from .two_sample import log_bf10, log_bf_directed, posterior_delta_pdf, prior_delta_pdf

SCHEMA_VERSION = 1
SEED_ENV = "VARBF_SEED"
DEFAULT_SEED = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
SENSITIVITY_RANGE = (0.5, 100.0)
DISPLAY_CAP = 700.0

log = logging.getLogger("varbf")


@dataclass
class AnalysisRequest:
    kind: str
    groups: list[GroupStats] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    hypotheses: list[str] = field(default_factory=list)
    alpha: float = 0.5
    alpha_target: ElicitationTarget | None = None
    null_interval: DeltaInterval | None = None
    alt_interval: DeltaInterval | None = None
    popsd: float | None = None
    order_scale: str = "precision"
    seed: int = DEFAULT_SEED
    config: ChainConfig = field(default_factory=ChainConfig)
    sd_divisor: str = "n-1"
    elicit_target: ElicitationTarget | None = None
    grid_size: int = 50


# ------------------------------------------------------------ input


def ingest_csv(path: str | Path, group_column: str, value_column: str) -> tuple[list[str], list[GroupStats]]:
    """Group statistics from a CSV file, groups in order of first appearance."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    values: dict[str, list[float]] = {}
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (group_column, value_column):
            if col not in header:
                raise ValidationError(f"column {col!r} not found in {path}; columns are {header}")
        for row in reader:
            line = reader.line_num
            raw = (row.get(value_column) or "").strip()
            try:
                x = float(raw)
            except ValueError as exc:
                raise ValidationError(f"row {line}: value {raw!r} is not a number") from exc
            if not math.isfinite(x):
                raise ValidationError(f"row {line}: value {raw!r} is not finite")
            label = (row.get(group_column) or "").strip()
            if not label:
                raise ValidationError(f"row {line}: empty group label")
            values.setdefault(label, []).append(x)
    if not values:
        raise ValidationError(f"{path} contains no observations")
    labels = list(values)
    return labels, [GroupStats.from_values(values[k]) for k in labels]


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"{what} must be a comma-separated list of numbers, got {text!r}") from exc


def _count(x: float, what: str) -> int:
    if x != int(x) or x < 1:
        raise ValidationError(f"{what} must be positive integers, got {x!r}")
    return int(x)


def _interval(text: str | None) -> DeltaInterval | None:
    return None if text is None else DeltaInterval.parse(text)


# ------------------------------------------------------------ summaries


def _bf_entry(numerator: str, denominator: str, result) -> dict:
    lb = float(result.log_bf)
    if abs(lb) <= DISPLAY_CAP:
        display = f"{math.exp(lb):.6g}"
    else:
        display = f"{'>' if lb > 0 else '<'}exp({'' if lb > 0 else '-'}{DISPLAY_CAP:g})"
    return {
        "numerator": numerator,
        "denominator": denominator,
        "log_bf": lb,
        "bf": math.exp(lb) if abs(lb) <= DISPLAY_CAP else None,
        "bf_display": display,
        "mc_se": None if result.mc_se is None else float(result.mc_se),
        "method": result.method,
        "flags": list(result.flags),
    }


def _density_summary(log_delta: np.ndarray, density: np.ndarray) -> dict:
    """Mean, quantiles and P(delta > 1) from a density tabulated on log delta."""
    delta = np.exp(log_delta)
    w = density * delta  # density with respect to log delta
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(log_delta))])
    total = cdf[-1]
    cdf /= total
    mean = float(np.trapezoid(w * delta, log_delta) / total)

    def q(p):
        return float(np.exp(np.interp(p, cdf, log_delta)))

    return {
        "mean": mean,
        "median": q(0.5),
        "ci95": [q(0.025), q(0.975)],
        "prob_greater_than_1": float(1.0 - np.interp(0.0, log_delta, cdf)),
    }


def _posterior_grid(pdf) -> np.ndarray:
    """log-delta grid covering the bulk of a unimodal posterior."""
    coarse = np.linspace(-15, 15, 6001)
    with np.errstate(all="ignore"):
        lw = np.log(pdf(np.exp(coarse))) + coarse
    lw = np.where(np.isfinite(lw), lw, -np.inf)
    keep = np.nonzero(lw > lw.max() - 50)[0]
    lo = coarse[max(keep[0] - 1, 0)]
    hi = coarse[min(keep[-1] + 1, coarse.size - 1)]
    return np.linspace(lo, hi, 4001)


def _prior_delta_quantile(p: float, prior: PriorSpec) -> float:
    rho = special.betaincinv(prior.alpha1, prior.alpha2, p)
    return math.sqrt(rho / (1 - rho))


def _density_table(prior_pdf, post_pdf, prior: PriorSpec) -> np.ndarray:
    post_grid = _posterior_grid(post_pdf)
    lo = min(math.log(_prior_delta_quantile(1e-5, prior)), post_grid[0])
    hi = max(math.log(_prior_delta_quantile(1 - 1e-5, prior)), post_grid[-1])
    grid = np.unique(np.concatenate([np.linspace(lo, hi, 4001), post_grid]))
    delta = np.exp(grid)
    return np.column_stack([delta, prior_pdf(delta), post_pdf(delta)])


def _write_table(path: Path, header: Sequence[str], rows: np.ndarray) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) for v in r])
    except OSError as exc:
        raise VarBFError(f"cannot write {path}: {exc}") from exc


def sensitivity_grid(size: int) -> np.ndarray:
    if size < 2:
        raise ValidationError("sensitivity grid needs at least 2 points")
    grid = np.geomspace(*SENSITIVITY_RANGE, size)
    grid[0], grid[-1] = SENSITIVITY_RANGE
    return grid


# ------------------------------------------------------------ analyses


def _interval_label(interval: DeltaInterval | None) -> str:
    if interval is None:
        return "delta = 1"
    if interval.is_full:
        return "delta unrestricted"
    return f"delta in [{interval.lo:g}, {interval.hi:g}]"


def _effective_alpha(req: AnalysisRequest) -> tuple[float, str]:
    if req.alpha_target is not None:
        return solve_alpha(req.alpha_target), "elicited"
    return req.alpha, "given"


def _groups_block(req: AnalysisRequest) -> list[dict]:
    out = []
    for label, g in zip(req.labels, req.groups):
        out.append({
            "label": label,
            "n": g.n,
            "ss": g.ss,
            "sd": math.sqrt(g.ss / (g.n - 1)) if g.n > 1 else None,
        })
    return out


def _run_two(req: AnalysisRequest, alpha: float, plots: Path | None) -> dict:
    g1, g2 = req.groups
    prior = PriorSpec(alpha)

    def compute(p: PriorSpec):
        if req.alt_interval is None and req.null_interval is None:
            return log_bf10(g1, g2, p)
        alt = req.alt_interval or DeltaInterval(0.0)
        return log_bf_directed(g1, g2, p, alt, req.null_interval)

    result = compute(prior)
    num = _interval_label(req.alt_interval) if req.alt_interval else "delta unrestricted"
    post = lambda d: posterior_delta_pdf(d, g1, g2, prior)  # noqa: E731
    grid = _posterior_grid(post)
    report = {
        "comparisons": [_bf_entry(num, _interval_label(req.null_interval), result)],
        "posterior": {"parameter": "delta = sigma2 / sigma1", **_density_summary(grid, post(np.exp(grid)))},
    }
    if plots is not None:
        table = _density_table(lambda d: prior_delta_pdf(d, prior), post, prior)
        _write_table(plots / "delta_density.tsv", ("delta", "prior", "posterior"), table)
        alphas = sensitivity_grid(req.grid_size)
        sens = np.array([[a, compute(PriorSpec(float(a))).log_bf] for a in alphas])
        _write_table(plots / "alpha_sensitivity.tsv", ("alpha", "log_bf"), sens)
    return report


def _run_one(req: AnalysisRequest, alpha: float, plots: Path | None) -> dict:
    (g,) = req.groups
    if req.popsd is None or not req.popsd > 0:
        raise ValidationError("--popsd must be a positive number")
    problem = OneSampleProblem(g.n, g.ss, 1.0 / req.popsd**2)

    def compute(a: float):
        if req.alt_interval is None and req.null_interval is None:
            return log_bf10_one(problem, a)
        return log_bf_directed_one(problem, a, req.null_interval, req.alt_interval or DeltaInterval(0.0))

    result = compute(alpha)
    num = _interval_label(req.alt_interval) if req.alt_interval else "delta unrestricted"
    post = lambda d: posterior_delta_pdf_one(d, problem, alpha)  # noqa: E731
    grid = _posterior_grid(post)
    report = {
        "comparisons": [_bf_entry(num, _interval_label(req.null_interval), result)],
        "posterior": {"parameter": "delta = sigma0 / sigma", **_density_summary(grid, post(np.exp(grid)))},
        "reference_sd": req.popsd,
    }
    if plots is not None:
        prior = PriorSpec(alpha)
        table = _density_table(lambda d: prior_delta_pdf(d, prior), post, prior)
        _write_table(plots / "delta_density.tsv", ("delta", "prior", "posterior"), table)
        alphas = sensitivity_grid(req.grid_size)
        sens = np.array([[a, compute(float(a)).log_bf] for a in alphas])
        _write_table(plots / "alpha_sensitivity.tsv", ("alpha", "log_bf"), sens)
    return report


def _run_k(req: AnalysisRequest, alpha: float, plots: Path | None) -> dict:
    k = len(req.groups)
    if len(req.hypotheses) < 2:
        raise ValidationError("give at least two hypotheses to compare")
    specs = [parse_hypothesis(h, k, req.order_scale) for h in req.hypotheses]
    cache = EvidenceCache(req.groups, alpha, req.config, req.seed)
    evidence = [cache.evidence(s) for s in specs]
    comparisons = []
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            result = log_bf(specs[j], specs[i], req.groups, alpha, req.config, req.seed, cache)
            comparisons.append(_bf_entry(req.hypotheses[j], req.hypotheses[i], result))

    free = parse_hypothesis(",".join(str(i) for i in range(1, k + 1)), k)
    post = cache.evidence(free).posterior
    rho = post.draws
    pairwise = []
    for i in range(k):
        for j in range(i + 1, k):
            d = np.sqrt(rho[:, i] / rho[:, j])
            lo, hi = np.quantile(d, [0.025, 0.975])
            pairwise.append({
                "groups": [req.labels[i], req.labels[j]],
                "parameter": f"delta = sd({req.labels[j]}) / sd({req.labels[i]})",
                "mean": float(d.mean()),
                "median": float(np.median(d)),
                "ci95": [float(lo), float(hi)],
                "prob_greater_than_1": float(np.mean(d > 1)),
            })
            if plots is not None:
                counts, edges = np.histogram(np.log(d), bins=100)
                width = np.diff(np.exp(edges))
                dens = counts / (counts.sum() * width)
                mids = np.exp(0.5 * (edges[1:] + edges[:-1]))
                _write_table(plots / f"pairwise_delta_{i + 1}_{j + 1}.tsv", ("delta", "posterior"), np.column_stack([mids, dens]))
    return {
        "hypotheses": [
            {"text": h, "canonical_precision_form": format_hypothesis(s), "log_ml": float(e.log_ml), "mc_se": float(e.se)}
            for h, s, e in zip(req.hypotheses, specs, evidence)
        ],
        "order_scale": req.order_scale,
        "comparisons": comparisons,
        "pairwise_posterior": pairwise,
        "sampler": {
            "chains": req.config.chains,
            "warmup": req.config.warmup,
            "draws": req.config.draws,
            "acceptance_rate": float(post.acceptance_rate),
            "ess_min": float(post.ess_min),
        },
    }


def _run_elicit(req: AnalysisRequest) -> dict:
    t = req.elicit_target
    alpha = solve_alpha(t)
    return {
        "alpha": alpha,
        "target": {
            "interval": [t.interval.lo, t.interval.hi if math.isfinite(t.interval.hi) else "inf"],
            "prob": t.prob,
            "truncation": None if t.truncation is None else [t.truncation.lo, t.truncation.hi if math.isfinite(t.truncation.hi) else "inf"],
        },
        "achieved_prob": delta_interval_prob(t.interval, alpha, t.truncation),
    }


def run(req: AnalysisRequest, plots: Path | None = None) -> dict:
    """Carry out one analysis and return the report as a dictionary."""
    report: dict = {"schema_version": SCHEMA_VERSION, "kind": req.kind, "version": __version__}
    if req.kind == "elicit":
        report.update(_run_elicit(req))
        return report
    alpha, source = _effective_alpha(req)
    report.update({"alpha": alpha, "alpha_source": source, "sd_divisor": req.sd_divisor, "groups": _groups_block(req)})
    if plots is not None:
        plots.mkdir(parents=True, exist_ok=True)
    if req.kind == "one":
        report.update(_run_one(req, alpha, plots))
    elif req.kind == "two":
        report.update(_run_two(req, alpha, plots))
    else:
        report["seed"] = req.seed
        report.update(_run_k(req, alpha, plots))
    return report


# ------------------------------------------------------------ argument parsing


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varbf", description="Default Bayes factors for variances.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True, metavar="{one,two,k,elicit}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=0.5, help="prior shape (default 0.5)")
    common.add_argument("--alpha-interval", help="elicit alpha: delta interval 'lo,hi'")
    common.add_argument("--alpha-prob", type=float, help="elicit alpha: target probability")
    common.add_argument("--alpha-truncate", help="elicit alpha: conditioning interval 'lo,hi'")
    common.add_argument("--sd-divisor", choices=SD_DIVISORS, default="n-1")
    common.add_argument("--csv", help="raw data file instead of summary statistics")
    common.add_argument("--group-col", default="group")
    common.add_argument("--value-col", default="value")
    common.add_argument("--emit-plots", metavar="DIR", help="write plot tables to DIR")
    common.add_argument("--grid-size", type=int, default=50, help="points in the alpha sensitivity grid")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    intervals = argparse.ArgumentParser(add_help=False)
    intervals.add_argument("--null-interval", help="delta interval for the null, 'lo,hi' (default: delta = 1)")
    intervals.add_argument("--alt-interval", help="delta interval for the alternative, 'lo,hi'")

    one = sub.add_parser("one", parents=[common, intervals], help="one variance against a reference value")
    one.add_argument("--n", type=int)
    one.add_argument("--sd", type=float)
    one.add_argument("--popsd", type=float, required=True, help="reference standard deviation")

    two = sub.add_parser("two", parents=[common, intervals], help="two variances")
    two.add_argument("--n1", type=int)
    two.add_argument("--sd1", type=float)
    two.add_argument("--n2", type=int)
    two.add_argument("--sd2", type=float)

    k = sub.add_parser("k", parents=[common], help="equality and order hypotheses over K variances")
    k.add_argument("--ns", help="comma-separated sample sizes")
    k.add_argument("--sds", help="comma-separated standard deviations")
    k.add_argument("--hyp", nargs="+", required=True, help="hypotheses, e.g. '1=2=3' '1>2>3'")
    k.add_argument("--order-scale", choices=SCALES, default="precision",
                   help="read '>' as larger precision (default) or larger standard deviation")
    k.add_argument("--seed", type=int)
    k.add_argument("--chains", type=int, default=ChainConfig.chains)
    k.add_argument("--warmup", type=int, default=ChainConfig.warmup)
    k.add_argument("--draws", type=int, default=ChainConfig.draws)

    el = sub.add_parser("elicit", help="choose alpha from a probability statement")
    el.add_argument("--interval", required=True)
    el.add_argument("--prob", type=float, required=True)
    el.add_argument("--truncate")
    el.add_argument("--output", "-o")
    el.add_argument("-v", "--verbose", action="store_true")

    ver = sub.add_parser("verify")  # undocumented: runs the desiderata checks
    ver.add_argument("--replications", type=int, default=200)
    ver.add_argument("--seed", type=int, default=2024)
    ver.add_argument("--output", "-o")
    ver.add_argument("-v", "--verbose", action="store_true")
    return parser


def _summary_groups(args, kind: str) -> tuple[list[str], list[GroupStats]]:
    div = args.sd_divisor
    if kind == "one":
        if args.n is None or args.sd is None:
            raise ValidationError("give --n and --sd, or --csv")
        return ["1"], [GroupStats.from_sd(args.n, args.sd, div)]
    if kind == "two":
        if None in (args.n1, args.sd1, args.n2, args.sd2):
            raise ValidationError("give --n1 --sd1 --n2 --sd2, or --csv")
        return ["1", "2"], [GroupStats.from_sd(args.n1, args.sd1, div), GroupStats.from_sd(args.n2, args.sd2, div)]
    if args.ns is None or args.sds is None:
        raise ValidationError("give --ns and --sds, or --csv")
    ns = [_count(x, "--ns") for x in _floats(args.ns, "--ns")]
    sds = _floats(args.sds, "--sds")
    if len(ns) != len(sds):
        raise ValidationError("--ns and --sds differ in length")
    return [str(i + 1) for i in range(len(ns))], [GroupStats.from_sd(n, s, div) for n, s in zip(ns, sds)]


def request_from_args(args) -> AnalysisRequest:
    if args.kind == "elicit":
        target = ElicitationTarget(_interval(args.interval), args.prob, _interval(args.truncate))
        return AnalysisRequest("elicit", elicit_target=target)

    summary_given = any(
        getattr(args, name, None) is not None for name in ("n", "sd", "n1", "sd1", "n2", "sd2", "ns", "sds")
    )
    if args.csv and summary_given:
        raise ValidationError("give either summary statistics or --csv, not both")
    if args.csv:
        labels, groups = ingest_csv(args.csv, args.group_col, args.value_col)
    else:
        labels, groups = _summary_groups(args, args.kind)
    expected = {"one": 1, "two": 2}.get(args.kind)
    if expected is not None and len(groups) != expected:
        raise ValidationError(f"'{args.kind}' needs {expected} group(s), the data have {len(groups)}")
    if args.kind == "k" and len(groups) < 2:
        raise ValidationError("'k' needs at least two groups")

    alpha_target = None
    if args.alpha_interval is not None or args.alpha_prob is not None:
        if args.alpha_interval is None or args.alpha_prob is None:
            raise ValidationError("--alpha-interval and --alpha-prob go together")
        alpha_target = ElicitationTarget(_interval(args.alpha_interval), args.alpha_prob, _interval(args.alpha_truncate))
    if not (math.isfinite(args.alpha) and args.alpha > 0):
        raise ValidationError("--alpha must be positive")

    req = AnalysisRequest(
        args.kind,
        groups=groups,
        labels=labels,
        alpha=args.alpha,
        alpha_target=alpha_target,
        sd_divisor=args.sd_divisor,
        grid_size=args.grid_size,
    )
    if args.kind in ("one", "two"):
        req.null_interval = _interval(args.null_interval)
        req.alt_interval = _interval(args.alt_interval)
        if args.kind == "one":
            req.popsd = args.popsd
    else:
        req.hypotheses = list(args.hyp)
        req.order_scale = args.order_scale
        req.seed = args.seed if args.seed is not None else _default_seed()
        req.config = ChainConfig(chains=args.chains, warmup=args.warmup, draws=args.draws)
    return req


def _emit(obj: dict, output: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _error(kind: str, exc: Exception) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "error": {"type": kind, "message": str(exc)}}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        out["error"]["diagnostics"] = {k: repr(v) for k, v in diag.items()}
    return out


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    output = getattr(args, "output", None)
    try:
        if args.kind == "verify":
            from .verify import desiderata_suite

            report = desiderata_suite(args.replications, args.seed).as_dict()
            _emit({"schema_version": SCHEMA_VERSION, "kind": "verify", **report}, output)
            return EXIT_OK if report["passed"] else EXIT_NUMERIC
        req = request_from_args(args)
        plots = Path(args.emit_plots) if getattr(args, "emit_plots", None) else None
        _emit(run(req, plots), output)
        return EXIT_OK
    except (ValidationError, DomainError) as exc:
        _emit(_error("validation", exc), output)
        return EXIT_INVALID
    except NumericError as exc:
        _emit(_error("numeric", exc), output)
        return EXIT_NUMERIC
    except VarBFError as exc:
        _emit(_error("io", exc), output)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
