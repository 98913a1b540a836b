"""Command-line entry point: ``sustain-extract {solve,audit,oracle-check,sweep}``.

Exit codes: 0 ok, 1 config or input error, 2 solver failure, 3 oracle gap exceeded.
Errors are also printed to stderr as a one-line JSON object.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from . import plotting, tables
from .errors import ConfigError, GuardError, SustainError
from .oracle import OracleConfig, compare, enumerate_maxmin
from .rules import costate_hotelling_link, costates, residual_report
from .solver import solve_constant_consumption

log = logging.getLogger("sustain_extract")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GAP = 0, 1, 2, 3
THREADS_ENV = "SUSTAIN_EXTRACT_THREADS"

SWEEP_METRICS = [
    "cbar", "iterations", "max_hotelling_rel", "max_present_value_abs",
    "max_user_cost_abs", "max_hartwick_abs", "consumption_drift", "mean_margin",
]


def _emit_error(exc, status):
    code = getattr(exc, "code", "error")
    print(json.dumps({"error": code, "message": str(exc), "exit": status}), file=sys.stderr)
    return status


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _finite(obj):
    """Replace NaN and infinities (at any depth) with None so the JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _costate_summary(traj, report):
    cs = costates(traj)
    link = costate_hotelling_link(traj, report.hotelling, cs.pi)
    return {
        "max_psi_residual": float(np.max(np.abs(cs.psi_residual))),
        "max_psi_hotelling_disagreement": float(np.max(np.abs(cs.psi_residual - link))),
    }


# --- subcommands -------------------------------------------------------------------

def cmd_solve(args) -> int:
    run = cfg.load(args.config)
    out = _outdir(args.out)
    try:
        res = solve_constant_consumption(run.economy, run.resources, run.demand, run.solver)
    except SustainError as exc:
        _dump({"status": "failed", "error": exc.code, "message": str(exc)}, out / "summary.json")
        return _emit_error(exc, EXIT_SOLVER)
    traj = res.trajectory
    tables.write_trajectory(traj, out / "trajectory.csv")
    tables.write_residuals(traj, res.report, out / "residuals.csv")
    summary = {
        "status": "converged",
        "cbar": res.cbar,
        "iterations": res.iterations,
        "terminal_mismatch": res.terminal_mismatch,
        "initial_adjusted_price": res.initial_adjusted_price,
        "terminal_stock": traj.stock[-1],
        "min_capital": res.diagnostics["min_capital"],
        "max_residuals": _finite(res.report.summary),
        "costates": _costate_summary(traj, res.report),
    }
    _dump(summary, out / "summary.json")
    if run.figures and not args.no_figures:
        plotting.plot_trajectory(traj, out / "trajectory.png")
        plotting.plot_residuals(traj, res.report, out / "residuals.png")
    log.info("solved: cbar=%.6g in %d iterations", res.cbar, res.iterations)
    return EXIT_OK


def cmd_audit(args) -> int:
    run = cfg.load(args.config)
    if not args.data:
        raise ConfigError("audit needs --data")
    out = _outdir(args.out)
    traj = tables.read_audit_data(args.data, run.economy, run.resources, run.demand,
                                  run.solver.impact_scale)
    report = residual_report(traj)
    tables.write_residuals(traj, report, out / "residuals.csv")
    _dump({
        "status": "audited",
        "steps": traj.steps,
        "max_residuals": _finite(report.summary),
        "costates": _costate_summary(traj, report),
    }, out / "summary.json")
    if run.figures and not args.no_figures:
        plotting.plot_residuals(traj, report, out / "residuals.png")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    run = cfg.load(args.config)
    ocfg = run.oracle or OracleConfig(periods=min(run.economy.horizon_steps, 5))
    if args.max_gap is not None:
        ocfg = replace(ocfg, max_gap=args.max_gap)
    if ocfg.periods != run.economy.horizon_steps:
        raise ConfigError(
            f"oracle periods ({ocfg.periods}) must equal economy horizon_steps "
            f"({run.economy.horizon_steps})"
        )
    out = _outdir(args.out)
    oracle = enumerate_maxmin(ocfg, run.economy, run.resources, run.demand)
    try:
        res = solve_constant_consumption(run.economy, run.resources, run.demand, run.solver)
    except SustainError as exc:
        return _emit_error(exc, EXIT_SOLVER)
    report = compare(res, oracle, ocfg)
    report["evaluated_sequences"] = oracle.evaluated
    report["feasible_sequences"] = oracle.feasible
    _dump(_finite(report), out / "oracle_check.json")
    if run.figures and not args.no_figures:
        names = [r.name for r in run.resources]
        plotting.plot_oracle(res.trajectory.extraction, oracle.best_sequence, names,
                             out / "oracle.png")
    if not report["within_gap"]:
        print(json.dumps({"error": "oracle_gap", "relative_gap": report["relative_gap"],
                          "exit": EXIT_GAP}), file=sys.stderr)
        return EXIT_GAP
    return EXIT_OK


def sweep_cell(doc: dict) -> dict:
    """Solve one sweep cell; failures are recorded, not raised."""
    try:
        run = cfg.build(doc)
        res = solve_constant_consumption(run.economy, run.resources, run.demand, run.solver)
    except SustainError as exc:
        return {"status": exc.code}
    row = {"status": "converged", "cbar": res.cbar, "iterations": res.iterations,
           "mean_margin": float(np.mean(res.trajectory.margin))}
    row.update(res.report.summary)
    return row


def _workers(cells):
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return max(1, min(n, cells))


def cmd_sweep(args) -> int:
    run = cfg.load(args.config)
    if not run.sweep:
        raise ConfigError("config has no sweep block")
    out = _outdir(args.out)
    keys = list(run.sweep)
    combos = list(itertools.product(*(run.sweep[k] for k in keys)))
    docs = [cfg.with_values(run.raw, dict(zip(keys, c))) for c in combos]
    workers = _workers(len(docs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_cell, docs))
    else:
        results = [sweep_cell(d) for d in docs]

    rows = []
    for i, (combo, res) in enumerate(zip(combos, results)):
        row = {"cell": i, **dict(zip(keys, combo)), **res}
        rows.append(row)
    header = ["cell", *keys, "status", *SWEEP_METRICS]
    tables.write_rows(out / "sweep.csv", header,
                  [[r.get(h, float("nan")) for h in header] for r in rows])
    long_rows = []
    for r in rows:
        for mname in SWEEP_METRICS:
            long_rows.append([r["cell"], *(r[k] for k in keys), mname, r.get(mname, float("nan"))])
    tables.write_rows(out / "sweep_long.csv", ["cell", *keys, "metric", "value"], long_rows)
    if run.figures and not args.no_figures:
        plotting.plot_sweep(rows, keys, out / "sweep.png")
    return EXIT_OK


# --- entry -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sustain-extract",
        description="Constant-consumption extraction paths with externality-adjusted prices.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("solve", help="solve for the constant-consumption path")
    common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("audit", help="rule residuals for an observed series")
    common(p)
    p.add_argument("--data", required=True, help="CSV with t, resource, price, quantity, stock")
    p.set_defaults(func=cmd_audit)
    p = sub.add_parser("oracle-check", help="compare the solver with brute-force enumeration")
    common(p)
    p.add_argument("--max-gap", type=float, default=None, help="relative consumption gap bound")
    p.set_defaults(func=cmd_oracle_check)
    p = sub.add_parser("sweep", help="Cartesian parameter sweep")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GuardError) as exc:
        return _emit_error(exc, EXIT_CONFIG)
    except SustainError as exc:
        return _emit_error(exc, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
