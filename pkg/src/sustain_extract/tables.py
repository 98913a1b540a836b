"""CSV emission and ingestion.

Floats are written with 17 significant digits so files round-trip exactly;
undefined entries are written as empty cells.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict

import numpy as np

from .errors import InputError
from .externality import externality_margin
from .model import DemandSystem, EconomySpec
from .rules import RuleResidualReport, Trajectory
from .solver import assemble

TRAJECTORY_COLUMNS = [
    "t", "resource", "price", "adjusted_price", "margin", "extraction", "stock",
    "growth", "income", "investment", "consumption", "capital",
]
RESIDUAL_COLUMNS = [
    "t", "resource", "hotelling_rel", "present_value_abs", "user_cost_abs",
    "hartwick_abs", "consumption_drift",
]
AUDIT_REQUIRED = ["t", "resource", "price", "quantity", "stock"]


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else format(x, ".17g")


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_trajectory(traj: Trajectory, path) -> None:
    G = traj.growth
    rows = []
    for t in range(traj.steps + 1):
        for j, res in enumerate(traj.resources):
            rows.append([
                t, res.name, traj.price[t, j], traj.adjusted_price[t, j], traj.margin[t, j],
                traj.extraction[t, j], traj.stock[t, j], G[t, j], traj.income[t],
                traj.investment[t], traj.consumption[t], traj.capital[t],
            ])
    write_rows(path, TRAJECTORY_COLUMNS, rows)


def write_residuals(traj: Trajectory, report: RuleResidualReport, path) -> None:
    T = traj.steps
    nan = float("nan")
    rows = []
    for t in range(T + 1):
        for j, res in enumerate(traj.resources):
            step = t < T
            rows.append([
                t, res.name,
                report.hotelling[t, j] if step else nan,
                report.present_value[t, j] if step else nan,
                report.user_cost[t, j] if step else nan,
                report.hartwick[t], report.drift[t],
            ])
    write_rows(path, RESIDUAL_COLUMNS, rows)


def read_audit_data(path, econ: EconomySpec, resources, demand: DemandSystem,
                    impact_scale: float = 1.0) -> Trajectory:
    """Build a trajectory from an observed series.

    Required columns: t, resource, price, quantity (``extraction`` accepted
    as an alias), stock. When both ``capital`` and ``investment`` columns are
    present they are used as given; otherwise capital is rebuilt from the
    configured initial capital with consumption fixed at t = 0.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            data = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read data {path}: {exc}") from exc
    header = list(header)
    if "quantity" not in header and "extraction" in header:
        qcol = "extraction"
    else:
        qcol = "quantity"
    missing = [c for c in AUDIT_REQUIRED if (qcol if c == "quantity" else c) not in header]
    if missing:
        raise InputError(f"data is missing required columns: {', '.join(missing)}")
    if not data:
        raise InputError("data has no rows")

    names = [r.name for r in resources]
    by_res = defaultdict(list)
    for i, row in enumerate(data):
        key = row["resource"]
        if key not in names:
            if key.isdigit() and int(key) < len(names):
                key = names[int(key)]
            else:
                raise InputError(f"row {i + 2}: unknown resource {row['resource']!r}")
        try:
            t = int(row["t"])
            vals = [float(row[c]) for c in ("price", qcol, "stock")]
        except ValueError as exc:
            raise InputError(f"row {i + 2}: {exc}") from None
        extra = {c: row.get(c) for c in ("capital", "investment")}
        by_res[key].append((t, vals, extra))

    T = None
    for name in names:
        rows = by_res.get(name)
        if not rows:
            raise InputError(f"no rows for resource {name!r}")
        ts = [r[0] for r in rows]
        if ts != list(range(len(ts))):
            raise InputError(f"time index for {name!r} is not 0, 1, 2, ... in increasing order")
        if T is not None and len(ts) - 1 != T:
            raise InputError("resources cover different time ranges")
        T = len(ts) - 1
    if T < 1:
        raise InputError("data needs at least two time steps")
    if not np.isscalar(econ.interest_rate) and T > len(econ.interest_rate):
        raise InputError(f"interest schedule has {len(econ.interest_rate)} steps, data has {T}")

    arr = np.array([[by_res[name][t][1] for name in names] for t in range(T + 1)])
    p, Q, X = arr[..., 0], arr[..., 1], arr[..., 2]
    m = np.empty_like(p)
    for t in range(T + 1):
        try:
            m[t] = externality_margin(demand, Q[t], impact_scale, price=p[t]).margin
        except ValueError as exc:
            raise InputError(f"step {t}: {exc}") from None
    P = p * (1.0 + m)
    traj = assemble(econ, resources, demand, P, Q, p, m, X)

    first = by_res[names[0]]
    if all(first[t][2]["capital"] not in (None, "") and first[t][2]["investment"] not in (None, "")
           for t in range(T + 1)):
        K = np.array([float(first[t][2]["capital"]) for t in range(T + 1)])
        inv = np.array([float(first[t][2]["investment"]) for t in range(T + 1)])
        r = np.array([econ.rate(t) for t in range(T + 1)])
        Y = r * K + np.einsum("tj,tj->t", p, Q)
        traj.capital, traj.income, traj.investment = K, Y, inv
        traj.consumption = Y - inv
    return traj
