"""Command-line front end: ``isac-lab {metrics,ccdf,region,validate}``.

All outputs are CSV (or JSON lines for ``validate``) written to ``--out`` or
stdout. Rows are produced in a fixed order so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import crb, oracle, stochastic as st
from .errors import ConfigError, IsacLabError
from .precoder import SlbSplit, SsjbSplit
from .quadrature import QuadratureBudget
from .scenario import ScenarioConfig, load_config

log = logging.getLogger("isac_lab")

REGION_CRB_KIND = {"ssjb": "lower", "slb": "approx"}


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def write_csv(header, rows, out: str | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([x if isinstance(x, str) else fmt(x) for x in r])
    emit(buf.getvalue(), out)


def emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def parse_eps(spec: str) -> np.ndarray:
    """``start:stop:steps[:log|lin]``; log spacing is the default."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"--eps expects start:stop:steps[:log|lin], got {spec!r}")
    try:
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"--eps: {exc}") from exc
    mode = parts[3] if len(parts) == 4 else "log"
    if steps < 1:
        raise ConfigError("--eps needs at least one step")
    if start <= 0 or stop <= 0:
        raise ConfigError("--eps bounds must be positive")
    if stop < start or (stop == start and steps > 1):
        raise ConfigError("--eps grid must be ascending (start < stop)")
    if mode == "log":
        grid = np.logspace(math.log10(start), math.log10(stop), steps)
    elif mode == "lin":
        grid = np.linspace(start, stop, steps)
    else:
        raise ConfigError(f"--eps spacing must be log or lin, got {mode!r}")
    return st.check_eps(grid)


def split_from_args(scheme: str, args) -> SsjbSplit | SlbSplit:
    if scheme == "ssjb":
        alpha = args.alpha if args.alpha is not None else math.sqrt(0.5)
        return SsjbSplit(args.tau if args.tau is not None else 0.5, alpha)
    return SlbSplit(
        args.tau1 if args.tau1 is not None else 0.5,
        args.tau2 if args.tau2 is not None else 0.2,
        args.tau3 if args.tau3 is not None else 0.2,
    )


def split_columns(scheme: str):
    return ("tau", "alpha") if scheme == "ssjb" else ("tau1", "tau2", "tau3", "tau4")


def split_values(split):
    if isinstance(split, SsjbSplit):
        return (split.tau, split.alpha)
    return (split.tau1, split.tau2, split.tau3, split.tau4)


# --- metrics ---------------------------------------------------------------------

def metric_rows(scheme: str, split, config: ScenarioConfig, budget: QuadratureBudget):
    rep = st.ergodic_report(scheme, split, config, budget)
    rows = list(rep.rows())
    if scheme == "ssjb":
        strong = crb.crb_phi_strong("ssjb", split, 0.0, config, strict=False)
        weak = crb.crb_phi_weak("ssjb", split, 0.0, config, strict=False)
        rows.append(("crb_phi_strong_at_0", "exact", strong))
        rows.append(("crb_phi_weak_at_0", "exact", weak))
        rows.append(("weak_strong_ratio", "exact", weak / strong if math.isfinite(strong) else math.nan))
    return rows


def cmd_metrics(args) -> int:
    config = load_config(args.config)
    split = split_from_args(args.scheme, args)
    rows = metric_rows(args.scheme, split, config, QuadratureBudget(rel_tol=1e-6, seed=args.seed))
    write_csv(("metric", "kind", "value"), rows, args.out)
    return 0


# --- ccdf --------------------------------------------------------------------------

def cmd_ccdf(args) -> int:
    config = load_config(args.config)
    split = split_from_args(args.scheme, args)
    target = "bs" if args.target == "bs" else f"eav_{args.strength}"
    eps = parse_eps(args.eps)
    kinds = [k for k in args.kinds.split(",") if k] if args.kinds else list(st.available_kinds(args.scheme, target))
    budget = QuadratureBudget(rel_tol=1e-6, qmc_points=args.qmc_points, seed=args.seed)
    cols, header = [], ["eps"]
    stderr = None
    for k in kinds:
        if k == "empirical":
            if target == "bs":
                metric = lambda b: oracle.crb_bs(b, args.scheme, split, config)  # noqa: E731
            else:
                metric = lambda b: oracle.crb_eav(b, args.scheme, split, config, args.strength)  # noqa: E731
            curve = oracle.mc_ccdf(metric, config, eps, args.samples, args.seed, args.scheme, target)
            stderr = curve.stderr
            if curve.n_inf:
                log.info("%d of %d realizations had an infinite CRB", curve.n_inf, args.samples)
        else:
            curve = st.ccdf_curve(args.scheme, target, k, eps, split, config, budget)
        cols.append(curve.p)
        header.append(k)
    if stderr is not None:
        header.append("stderr")
        cols.append(stderr)
    rows = [[e] + [c[i] for c in cols] for i, e in enumerate(eps)]
    write_csv(header, rows, args.out)
    return 0


# --- region ------------------------------------------------------------------------

def sweep_splits(scheme: str, density: int):
    if density < 2:
        raise ConfigError(f"--grid must be >= 2, got {density}")
    g = np.round(np.linspace(0.0, 1.0, density), 12)
    if scheme == "ssjb":
        return [SsjbSplit(float(t), float(a)) for t in g for a in g], 0
    out, skipped = [], 0
    for t1 in g:
        for t2 in g:
            for t3 in g:
                if t1 + t2 + t3 > 1.0 + 1e-9:
                    skipped += 1
                    continue
                # snap rounding so the simplex constraint holds exactly
                out.append(SlbSplit(float(t1), float(t2), float(max(0.0, min(t3, 1.0 - t1 - t2)))))
    return out, skipped


def region_points(scheme: str, density: int, adversary: str, target: str, config: ScenarioConfig,
                  budget: QuadratureBudget | None = None, crb_kind: str | None = None):
    budget = budget or QuadratureBudget(rel_tol=1e-6)
    splits, skipped = sweep_splits(scheme, density)
    if skipped:
        log.info("skipped %d infeasible split points", skipped)
    tgt = "bs" if target == "bs" else "eav_strong"
    pts = []
    for sp in splits:
        e = st.ergodic_crb(scheme, tgt, sp, config, budget)
        if tgt == "bs":
            x = e[crb_kind or REGION_CRB_KIND[scheme]]
        else:
            x = next(iter(e.values()))
        pts.append({"split": sp, "e_crb": float(x), "esr": st.esr(scheme, sp, config, adversary, budget)})
    return pts


def pareto_flags(xs, ys):
    """Nondominated points for (minimize x, maximize y); non-finite x never qualifies."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    flags = []
    for i in range(len(xs)):
        if not np.isfinite(xs[i]):
            flags.append(False)
            continue
        dom = (xs <= xs[i]) & (ys >= ys[i]) & ((xs < xs[i]) | (ys > ys[i]))
        flags.append(not bool(dom.any()))
    return flags


def cmd_region(args) -> int:
    config = load_config(args.config)
    budget = QuadratureBudget(rel_tol=1e-6, seed=args.seed)
    pts = region_points(args.scheme, args.grid, args.adversary, args.target, config, budget, args.crb_kind)
    if args.target == "bs":
        flags = pareto_flags([p["e_crb"] for p in pts], [p["esr"] for p in pts])
    else:
        flags = [False] * len(pts)
    rows = [[args.scheme, *split_values(p["split"]), p["e_crb"], p["esr"], f] for p, f in zip(pts, flags)]
    rows.sort(key=lambda r: tuple(r[1:-3]))
    write_csv(["scheme", *split_columns(args.scheme), "e_crb", "esr", "pareto"], rows, args.out)
    return 0


# --- validate -----------------------------------------------------------------------

def cmd_validate(args) -> int:
    from .validation import gate_passed, run_validation

    config = load_config(args.config)
    records = run_validation(config, args.samples, args.seed, args.negative_control, args.threads)
    emit("".join(r.to_json() + "\n" for r in records), args.out)
    failed = [r.check for r in records if not r.passed and r.extra.get("gate", True)]
    if failed:
        log.error("%d check(s) failed: %s", len(failed), ", ".join(sorted(set(failed))))
    return 0 if gate_passed(records) else 1


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isac-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scheme=True):
        sp.add_argument("--config", help="JSON scenario file (missing keys take defaults)")
        if scheme:
            sp.add_argument("--scheme", choices=st.SCHEMES, default="ssjb")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (default: stdout)")

    def splits(sp):
        sp.add_argument("--tau", type=float, help="SSJB data power fraction (default 0.5)")
        sp.add_argument("--alpha", type=float, help="SSJB target-direction beam weight (default sqrt(0.5))")
        sp.add_argument("--tau1", type=float, help="SLB data fraction (default 0.5)")
        sp.add_argument("--tau2", type=float, help="SLB artificial-noise fraction (default 0.2)")
        sp.add_argument("--tau3", type=float, help="SLB radar-along-a fraction (default 0.2)")

    m = sub.add_parser("metrics", help="analytic metrics for one operating point")
    common(m)
    splits(m)
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("ccdf", help="CRB outage curves P(CRB > eps)")
    common(c)
    splits(c)
    c.add_argument("--target", choices=("bs", "eav"), default="bs")
    c.add_argument("--strength", choices=("strong", "weak"), default="strong")
    c.add_argument("--eps", default="0.01:100:20:log", help="start:stop:steps[:log|lin]")
    c.add_argument("--kinds", help="comma list of exact,lower,upper,approx,empirical")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--qmc-points", type=int, default=2**16)
    c.set_defaults(func=cmd_ccdf)

    r = sub.add_parser("region", help="ergodic CRB versus secrecy rate over a split grid")
    common(r)
    r.add_argument("--grid", type=int, default=11, help="points per split axis")
    r.add_argument("--adversary", choices=("external", "target"), default="external")
    r.add_argument("--target", choices=("bs", "eav"), default="bs")
    r.add_argument("--crb-kind", choices=("lower", "approx", "upper"), help="BS ergodic CRB kind on the x axis")
    r.set_defaults(func=cmd_region)

    v = sub.add_parser("validate", help="analytic-versus-Monte-Carlo report (JSON lines)")
    common(v, scheme=False)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--threads", type=int, help="worker threads (default: ISAC_LAB_THREADS or CPU count)")
    v.add_argument("--negative-control", action="store_true", help="corrupt c3 in the analytic path")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except (IsacLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
