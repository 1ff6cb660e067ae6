"""Command-line front end.

Subcommands::

    ms2gd train      run solvers on a dataset, write one CSV trace per run
    ms2gd plan       work-optimal (h, m) for a target rate, as JSON
    ms2gd speedup    plan over b = 1..b_max, as CSV
    ms2gd reference  high-accuracy P(x*) and x* for gap computation

Exit codes: 0 success, 1 runtime failure (divergence), 2 usage or validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import SyntheticSpec, generate_synthetic, load_libsvm, normalize_rows
from .problem import CompositeProblem, Regularizer, linear_problem
from .solver import (
    DivergenceError,
    RunTrace,
    SolverConfig,
    ms2gd_run,
    prox_gd_reference,
    prox_sgd_run,
)
from .theory import InfeasibleParameters, UnreachableTarget, plan, rho_general, speedup_curve

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

TRACE_COLUMNS = ("epoch", "effective_passes", "objective", "gap", "evaluations", "seconds")


class UsageError(Exception):
    pass


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % v


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _dumps(obj) -> str:
    return json.dumps(_finite(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def _finite(obj):
    # strict JSON has no inf/nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- problem construction -----------------------------------------------------

def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {part!r}")
        out[key.strip()] = val.strip()
    return out


def parse_synthetic(text: str, loss: str) -> SyntheticSpec:
    kv = parse_kv(text)
    known = {"n", "d", "condition", "noise", "seed", "task"}
    if set(kv) - known:
        raise UsageError(f"unknown synthetic keys {sorted(set(kv) - known)}")
    if "n" not in kv or "d" not in kv:
        raise UsageError("--synthetic needs n=... and d=...")
    task = kv.get("task", "classification" if loss == "logistic" else "regression")
    try:
        return SyntheticSpec(
            n=int(kv["n"]), d=int(kv["d"]),
            condition=float(kv.get("condition", 1.0)),
            noise=float(kv.get("noise", 0.0)),
            seed=int(kv.get("seed", 0)), task=task,
        )
    except ValueError as exc:
        raise UsageError(f"--synthetic: {exc}") from None


def build_problem(args) -> CompositeProblem:
    if (args.dataset is None) == (args.synthetic is None):
        raise UsageError("give exactly one of --dataset or --synthetic")
    if args.dataset is not None:
        ds = load_libsvm(args.dataset, binary_labels=args.loss == "logistic")
    else:
        ds = generate_synthetic(parse_synthetic(args.synthetic, args.loss))
    if not args.raw:
        ds = normalize_rows(ds)
    lam, lam2 = args.lam, args.lam2
    ridge_in_f = 0.0
    if args.reg == "none":
        reg = Regularizer.zero()
    elif args.reg == "l1":
        reg = Regularizer.l1(lam)
    elif args.reg == "en":
        reg = Regularizer.elastic_net(lam, lam2)
    elif args.lambda_in == "f":
        reg, ridge_in_f = Regularizer.zero(), lam
    else:
        reg = Regularizer.l2(lam)
    return linear_problem(ds, args.loss, reg, ridge_in_f=ridge_in_f)


# -- solver specs -------------------------------------------------------------

@dataclass
class SolverSpec:
    kind: str
    b: int = 1
    h: Optional[float] = None
    m: Optional[int] = None
    h_auto: bool = False
    m_auto: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"{self.kind}_b{self.b}"


def parse_solver(text: str) -> SolverSpec:
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in ("ms2gd", "s2gd", "sgd"):
        raise UsageError(f"unknown solver {kind!r} (choose ms2gd, s2gd or sgd)")
    kv = parse_kv(rest)
    allowed = {"b", "h"} if kind == "sgd" else {"b", "h", "m"}
    if set(kv) - allowed:
        raise UsageError(f"{kind}: unknown options {sorted(set(kv) - allowed)}")
    spec = SolverSpec(kind=kind)
    try:
        spec.b = int(kv.get("b", 1))
        if kind == "s2gd" and spec.b != 1:
            raise UsageError("s2gd is mS2GD with b=1; use ms2gd for other batch sizes")
        h = kv.get("h", "auto" if kind != "sgd" else None)
        if h is None:
            raise UsageError("sgd needs an explicit stepsize h=...")
        if h == "auto" and kind != "sgd":
            spec.h_auto = True
        else:
            spec.h = float(h)
        if kind != "sgd":
            m = kv.get("m", "auto")
            if m == "auto":
                spec.m_auto = True
            else:
                spec.m = int(m)
    except ValueError as exc:
        raise UsageError(f"bad solver option in {text!r}: {exc}") from None
    return spec


def resolve_solver(spec: SolverSpec, p: CompositeProblem, rho_target, m_cap) -> SolverSpec:
    """Fill ``auto`` hyperparameters from the planner."""
    if not 1 <= spec.b <= p.n:
        raise UsageError(f"{spec.label}: batch size must lie in [1, {p.n}]")
    if not (spec.h_auto or spec.m_auto):
        return spec
    if rho_target is None:
        raise UsageError(f"{spec.label}: auto hyperparameters need --rho-target")
    pl = plan(rho_target, spec.b, p.n, p.L, p.mu)
    if spec.h_auto:
        spec.h = pl.h_star
    if spec.m_auto:
        spec.m = pl.m_star_int
        if spec.m > m_cap:
            spec.notes.append(
                f"planned m={spec.m} capped at {m_cap}; rho target {rho_target} not guaranteed"
            )
            spec.m = m_cap
    spec.notes.append(f"planner regime {pl.regime}")
    return spec


def _trace_rows(trace: RunTrace, record_time: bool, ideal: bool = False):
    for r in trace.records:
        yield {
            "epoch": r.epoch,
            "effective_passes": r.ideal_passes if ideal else r.passes,
            "objective": r.objective,
            "gap": r.gap,
            "evaluations": r.evaluations,
            "seconds": r.seconds if record_time else None,
        }


def format_trace(trace: RunTrace, fmt: str, record_time: bool, ideal: bool = False) -> str:
    rows = list(_trace_rows(trace, record_time, ideal))
    if fmt == "json":
        return _dumps(rows)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in rows:
        w.writerow([_num(row[c]) for c in TRACE_COLUMNS])
    return out.getvalue()


def _load_reference(path) -> float:
    with open(path, encoding="utf-8") as fh:
        ref = json.load(fh)
    return float(ref["objective"])


def cmd_train(args) -> int:
    if not args.solver:
        raise UsageError("at least one --solver is required")
    specs = [parse_solver(s) for s in args.solver]
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    if args.rho_target is not None and not 0 < args.rho_target < 1:
        raise UsageError("--rho-target must lie in (0, 1)")
    seeds = _parse_seeds(args.seed)
    p = build_problem(args)
    m_cap = args.m_cap if args.m_cap is not None else 10 * p.n
    specs = [resolve_solver(s, p, args.rho_target, m_cap) for s in specs]

    feas_report = {}
    for i, s in enumerate(specs):
        if s.kind == "sgd":
            continue
        cfg = SolverConfig(m=s.m, h=s.h, b=s.b, K=args.epochs)
        flags = cfg.feasibility(p)
        feas_report[i] = flags
        bad = [k for k, ok in flags.items() if not ok]
        if bad and not args.allow_infeasible:
            raise InfeasibleParameters(
                bad[0], f"{s.label} with h={s.h:.6g}, m={s.m} (pass --allow-infeasible to run anyway)"
            )

    ref_value = None
    ref_info = None
    if args.reference is not None:
        ref_value = _load_reference(args.reference)
        ref_info = {"source": str(args.reference), "objective": ref_value}
    elif not args.no_reference:
        ref = prox_gd_reference(p, tol=args.reference_tol, max_iters=args.reference_max_iters)
        ref_value = ref.value
        ref_info = {"source": "prox_gd_reference", "objective": ref.value,
                    "iterations": ref.iterations, "converged": ref.converged,
                    "tol": args.reference_tol}

    out_dir = Path(args.out_dir)
    ext = "json" if args.format == "json" else "csv"
    runs = []
    for i, s in enumerate(specs):
        for seed in seeds:
            stem = f"run{i}_{s.label}_seed{seed}"
            if s.kind == "sgd":
                steps = args.epochs * math.ceil(p.n / s.b)
                trace = prox_sgd_run(p, s.h, s.b, steps, seed=seed,
                                     reference_value=ref_value, timed=args.record_time)
            else:
                cfg = SolverConfig(m=s.m, h=s.h, b=s.b, K=args.epochs, seed=seed)
                trace = ms2gd_run(p, cfg, reference_value=ref_value, timed=args.record_time)
            files = {"trace": f"{stem}.{ext}"}
            atomic_write(out_dir / files["trace"], format_trace(trace, args.format, args.record_time))
            if s.kind != "sgd":
                files["ideal_parallel"] = f"{stem}_ideal.{ext}"
                atomic_write(out_dir / files["ideal_parallel"],
                             format_trace(trace, args.format, args.record_time, ideal=True))
            entry = {
                "solver": s.kind, "b": s.b, "h": s.h, "seed": seed, "files": files,
                "final_objective": trace.records[-1].objective,
                "final_gap": trace.records[-1].gap,
                "notes": s.notes,
            }
            if s.kind != "sgd":
                entry["m"] = s.m
                entry["feasibility"] = feas_report[i]
                try:
                    entry["predicted_rho"] = rho_general(
                        SolverConfig(m=s.m, h=s.h, b=s.b).rate_inputs(p))
                except InfeasibleParameters as exc:
                    entry["predicted_rho"] = None
                    entry["notes"] = s.notes + [f"no rate guarantee: {exc.condition}"]
            runs.append(entry)

    for s in specs:
        for note in s.notes:
            print(f"{s.label}: {note}", file=sys.stderr)
    manifest = {
        "problem": {"n": p.n, "d": p.d, "L": p.L, "mu": p.mu, "nu_f": p.nu_f,
                    "nu_R": p.nu_R, "loss": args.loss, "reg": args.reg,
                    "lambda": args.lam, "normalized": not args.raw},
        "epochs": args.epochs,
        "reference": ref_info,
        "columns": list(TRACE_COLUMNS),
        "runs": runs,
    }
    atomic_write(out_dir / "manifest.json", _dumps(manifest))
    print(f"wrote {len(runs)} runs to {out_dir}")
    return EXIT_OK


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None
    if not seeds or any(not 0 <= s < 2**64 for s in seeds):
        raise UsageError("seeds must be unsigned 64-bit integers")
    return seeds


def _validate_planner_args(args):
    if not 0 < args.rho_target < 1:
        raise UsageError(f"--rho-target must lie in (0, 1), got {args.rho_target}")
    if args.n < 1 or not args.L > 0 or not args.mu > 0:
        raise UsageError("need n >= 1, L > 0, mu > 0")


def cmd_plan(args) -> int:
    _validate_planner_args(args)
    if not 1 <= args.b <= args.n:
        raise UsageError(f"--b must lie in [1, {args.n}]")
    pl = plan(args.rho_target, args.b, args.n, args.L, args.mu)
    d = pl.as_dict()
    if args.format == "csv":
        keys = sorted(d)
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(keys)
        w.writerow([_num(d[k]) if not isinstance(d[k], str) else d[k] for k in keys])
        sys.stdout.write(out.getvalue())
    else:
        sys.stdout.write(_dumps(d))
    return EXIT_OK


SPEEDUP_COLUMNS = ("b", "h_star", "m_star", "work_ratio", "regime")


def cmd_speedup(args) -> int:
    _validate_planner_args(args)
    if not 1 <= args.b_max <= args.n:
        raise UsageError(f"--b-max must lie in [1, {args.n}]")
    curve = speedup_curve(args.rho_target, args.n, args.L, args.mu, range(1, args.b_max + 1))
    if args.format == "json":
        text = _dumps({
            "rho_target": curve.rho_target, "n": curve.n, "L": curve.L, "mu": curve.mu,
            "threshold": curve.threshold,
            "points": [{"b": pt.b, "h_star": pt.h_star, "m_star": pt.m_star,
                        "work_ratio": pt.work_ratio, "regime": pt.regime,
                        "error": pt.error} for pt in curve],
        })
    else:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SPEEDUP_COLUMNS)
        for pt in curve:
            if pt.regime == "error":
                w.writerow([pt.b, "", "", "", "error"])
            else:
                w.writerow([pt.b, _num(pt.h_star), _num(pt.m_star), _num(pt.work_ratio), pt.regime])
        text = out.getvalue()
    if args.out:
        atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_reference(args) -> int:
    if not args.tol > 0:
        raise UsageError(f"--tol must be positive, got {args.tol}")
    p = build_problem(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = prox_gd_reference(p, tol=args.tol, max_iters=args.max_iters)
    out_dir = Path(args.out_dir)
    atomic_write(out_dir / "x_star.txt", "".join(f"{_num(v)}\n" for v in ref.x))
    info = {
        "status": "converged" if ref.converged else "max_iters_reached",
        "objective": ref.value,
        "iterations": ref.iterations,
        "tol": args.tol,
        "x_file": "x_star.txt",
        "n": p.n, "d": p.d, "L": p.L, "mu": p.mu,
    }
    text = _dumps(info)
    atomic_write(out_dir / "reference.json", text)
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _add_problem_args(sp):
    g = sp.add_argument_group("problem")
    g.add_argument("--dataset", help="LibSVM text file")
    g.add_argument("--synthetic", metavar="n=..,d=..[,noise=..,seed=..,condition=..]",
                   help="generate a synthetic dataset instead of reading one")
    g.add_argument("--loss", choices=("logistic", "ridge"), default="logistic")
    g.add_argument("--reg", choices=("none", "l1", "l2", "en"), default="l2")
    g.add_argument("--lambda", dest="lam", type=float, default=1e-4,
                   help="regularization weight (l1 weight for en)")
    g.add_argument("--lambda2", dest="lam2", type=float, default=0.0,
                   help="l2 weight of the elastic net")
    g.add_argument("--lambda-in", choices=("R", "f"), default="R",
                   help="put the l2 penalty in the regularizer or in every component")
    g.add_argument("--raw", action="store_true", help="skip unit row normalization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ms2gd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run solvers and write traces")
    _add_problem_args(tr)
    tr.add_argument("--solver", action="append", default=[],
                    help="ms2gd:b=8,h=0.5,m=1000 | s2gd:h=..,m=.. | sgd:b=1,h=0.1; "
                         "h/m may be 'auto' (planner). Repeatable.")
    tr.add_argument("--epochs", type=int, default=20,
                    help="outer iterations (mS2GD) or effective passes (SGD)")
    tr.add_argument("--seed", default="0", help="seed or comma-separated seed list")
    tr.add_argument("--rho-target", type=float)
    tr.add_argument("--m-cap", type=int, help="cap for planner m (default 10*n)")
    tr.add_argument("--out-dir", default="runs")
    tr.add_argument("--format", choices=("csv", "json"), default="csv")
    tr.add_argument("--reference", help="reference.json from 'ms2gd reference'")
    tr.add_argument("--reference-tol", type=float, default=1e-13)
    tr.add_argument("--reference-max-iters", type=int, default=1_000_000)
    tr.add_argument("--no-reference", action="store_true", help="leave the gap column empty")
    tr.add_argument("--record-time", action="store_true",
                    help="fill the seconds column with wall time (output no longer byte-reproducible)")
    tr.add_argument("--allow-infeasible", action="store_true",
                    help="run mS2GD even when the stepsize condition fails")
    tr.set_defaults(func=cmd_train)

    pl = sub.add_parser("plan", help="work-optimal stepsize and inner-loop length")
    pl.add_argument("--rho-target", type=float, required=True)
    pl.add_argument("--b", type=int, required=True)
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--L", type=float, required=True)
    pl.add_argument("--mu", type=float, required=True)
    pl.add_argument("--format", choices=("csv", "json"), default="json")
    pl.set_defaults(func=cmd_plan)

    sp = sub.add_parser("speedup", help="planner sweep over batch sizes")
    sp.add_argument("--rho-target", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--L", type=float, required=True)
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--b-max", type=int, required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out", help="write here instead of standard output")
    sp.set_defaults(func=cmd_speedup)

    rf = sub.add_parser("reference", help="reference minimizer by proximal gradient")
    _add_problem_args(rf)
    rf.add_argument("--tol", type=float, default=1e-13)
    rf.add_argument("--max-iters", type=int, default=1_000_000)
    rf.add_argument("--out-dir", default="reference")
    rf.set_defaults(func=cmd_reference)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnreachableTarget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except InfeasibleParameters as exc:
        print(f"error: infeasible hyperparameters ({exc.condition}): {exc.detail}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
