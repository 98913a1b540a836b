"""Brute-force max-min oracle on tiny instances.

Every grid sequence of extractions is scored by the largest constant
consumption it can finance with nonnegative capital at every step. Capital
follows K_{t+1} = K_t + (r_t K_t + R_t - C) dt; no rule from this package is
used to form investment, so the search stays independent of the solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DemandError, GuardError
from .externality import externality_margin
from .model import DemandSystem, EconomySpec, growth_derivative, growth_eval
from .rules import Trajectory

ENUMERATION_GUARD = 10**7
MAX_PERIODS = 5
MAX_GRID = 80
CHUNK = 1 << 17


@dataclass(frozen=True)
class OracleConfig:
    periods: int = 3
    grid_points: int = 49
    bounds: tuple | None = None
    cbar_tolerance: float = 1e-6
    max_gap: float = 0.02

    def __post_init__(self):
        if not 1 <= self.periods <= MAX_PERIODS:
            raise ConfigError(f"oracle periods must lie in [1, {MAX_PERIODS}]")
        if not 1 <= self.grid_points <= MAX_GRID:
            raise ConfigError(f"oracle grid_points must lie in [1, {MAX_GRID}]")
        if not self.cbar_tolerance > 0:
            raise ConfigError("cbar_tolerance must be positive")

    def grids(self, resources) -> list[np.ndarray]:
        bounds = self.bounds or [(0.0, r.stock0) for r in resources]
        if len(bounds) != len(resources):
            raise ConfigError("one grid bound pair per resource is required")
        if self.grid_points == 1:
            return [np.array([float(lo)]) for lo, _ in bounds]
        return [np.linspace(lo, hi, self.grid_points) for lo, hi in bounds]


@dataclass
class OracleResult:
    best_sequence: np.ndarray  # (T, n)
    cbar: float
    trajectory: Trajectory
    price_factors: np.ndarray  # adjusted P(t+1) / P(t), (T-1, n)
    evaluated: int
    feasible: int
    gap: dict = field(default_factory=dict)


def _revenue(demand: DemandSystem, Q: np.ndarray) -> np.ndarray:
    """Total revenue over the last axis; NaN where prices are inadmissible.

    Zero extraction earns zero revenue when the price at zero is finite or
    the demand is diagonal isoelastic with own exponent below -1.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p = demand.prices_batch(Q)
        zero = Q == 0
        if demand.kind == "isoelastic":
            if demand.is_diagonal and np.all(np.diag(demand.exponents) < -1):
                p = np.where(zero, 0.0, p)
            bad = (~zero & ~(p > 0)) | (~np.isfinite(p))
            if not demand.is_diagonal:
                bad |= zero.any(axis=-1, keepdims=True)
        else:
            bad = ~(p > 0)
        terms = np.where(zero, 0.0, p * Q)
        rev = terms.sum(axis=-1)
        return np.where(bad.any(axis=-1), np.nan, rev)


def _stock_path(seq, econ, resources):
    """Stocks X_0..X_T for sequences shaped (..., T, n); NaN rows if infeasible."""
    T = seq.shape[-2]
    X0 = np.array([r.stock0 for r in resources], dtype=float)
    X = np.empty(seq.shape[:-2] + (T + 1, len(resources)))
    X[..., 0, :] = X0
    floor = -1e-12 * np.maximum(1.0, X0)
    ok = np.ones(seq.shape[:-2], dtype=bool)
    for t in range(T):
        cur = np.maximum(X[..., t, :], 0.0)
        G = np.stack([growth_eval(r.growth, cur[..., j]) for j, r in enumerate(resources)], -1)
        X[..., t + 1, :] = X[..., t, :] + (G - seq[..., t, :]) * econ.dt
        ok &= np.all(X[..., t + 1, :] >= floor, axis=-1)
    return X, ok


def _capital_affine(R, econ):
    """K_t = alpha_t - C beta_t for t = 0..T given revenues R (..., T)."""
    T = R.shape[-1]
    alpha = np.empty(R.shape[:-1] + (T + 1,))
    beta = np.empty(T + 1)
    alpha[..., 0] = econ.capital0
    beta[0] = 0.0
    for t in range(T):
        g = 1.0 + econ.rate(t) * econ.dt
        alpha[..., t + 1] = alpha[..., t] * g + R[..., t] * econ.dt
        beta[t + 1] = beta[t] * g + econ.dt
    return alpha, beta


def feasible_cbar(sequence, econ: EconomySpec, resources, demand: DemandSystem,
                  tol: float = 1e-6):
    """Largest constant consumption keeping K_t >= 0 at every step, or None.

    Found by bisection on C (every K_t is strictly decreasing in C).
    """
    seq = np.asarray(sequence, dtype=float)
    seq = seq.reshape(seq.shape[0], len(resources))
    if np.any(seq < 0):
        raise ValueError("extraction sequence must be nonnegative")
    _, ok = _stock_path(seq, econ, resources)
    R = _revenue(demand, seq)
    if not ok or np.any(np.isnan(R)):
        return None

    def capital_ok(C):
        K = econ.capital0
        for t, rev in enumerate(R):
            K = K + (econ.rate(t) * K + rev - C) * econ.dt
            if K < 0:
                return False
        return True

    if not capital_ok(0.0):
        return None
    lo, hi = 0.0, max(1.0, econ.capital0, float(R.max()))
    while capital_ok(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if capital_ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def enumerate_maxmin(config: OracleConfig, econ: EconomySpec, resources,
                     demand: DemandSystem) -> OracleResult:
    """Exhaustive search over grid sequences; ties go to the lexicographically first."""
    resources = list(resources)
    n, T = len(resources), config.periods
    grids = config.grids(resources)
    g = config.grid_points
    size = g ** (T * n)
    if size > ENUMERATION_GUARD:
        raise GuardError(f"enumeration of {size} sequences exceeds guard {ENUMERATION_GUARD}")
    shape = (g,) * (T * n)
    best_val, best_idx, feasible = -np.inf, None, 0
    for start in range(0, size, CHUNK):
        idx = np.arange(start, min(start + CHUNK, size))
        digits = np.stack(np.unravel_index(idx, shape), -1).reshape(-1, T, n)
        seq = np.empty(digits.shape)
        for j in range(n):
            seq[..., j] = grids[j][digits[..., j]]
        _, ok = _stock_path(seq, econ, resources)
        R = _revenue(demand, seq)
        ok &= ~np.isnan(R).any(axis=-1)
        alpha, beta = _capital_affine(np.nan_to_num(R), econ)
        with np.errstate(divide="ignore"):
            ratios = alpha[..., 1:] / beta[1:]
        ok &= np.all(alpha >= 0, axis=-1)
        cbar = np.where(ok, ratios.min(axis=-1), -np.inf)
        feasible += int(ok.sum())
        k = int(np.argmax(cbar))
        if cbar[k] > best_val:
            best_val, best_idx = float(cbar[k]), idx[k]
    if best_idx is None:
        raise ConfigError("no feasible extraction sequence on the oracle grid")
    digits = np.array(np.unravel_index(best_idx, shape)).reshape(T, n)
    best = np.column_stack([grids[j][digits[:, j]] for j in range(n)])
    traj = sequence_trajectory(best, best_val, econ, resources, demand)
    P = traj.adjusted_price[:T]
    return OracleResult(best, best_val, traj, P[1:] / P[:-1], size, feasible)


def sequence_trajectory(seq, cbar, econ, resources, demand) -> Trajectory:
    """Trajectory of a grid sequence financed at constant consumption ``cbar``.

    Flows at the terminal row are NaN; zero-extraction entries have no
    margin and carry NaN prices.
    """
    seq = np.asarray(seq, dtype=float)
    T, n = seq.shape
    X, _ = _stock_path(seq, econ, resources)
    Q = np.vstack([seq, np.full((1, n), np.nan)])
    p = np.full((T + 1, n), np.nan)
    m = np.full((T + 1, n), np.nan)
    for t in range(T):
        try:
            mr = externality_margin(demand, seq[t])
            p[t], m[t] = mr.market_price, mr.margin
        except DemandError:
            pass
    R = _revenue(demand, seq)
    K = np.empty(T + 1)
    Y = np.full(T + 1, np.nan)
    K[0] = econ.capital0
    for t in range(T):
        Y[t] = econ.rate(t) * K[t] + R[t]
        K[t + 1] = K[t] + (Y[t] - cbar) * econ.dt
    return Trajectory(
        econ=econ, resources=list(resources), demand=demand,
        price=p, adjusted_price=p * (1.0 + m), margin=m, extraction=Q, stock=X,
        capital=K, income=Y, investment=Y - cbar, consumption=np.full(T + 1, cbar),
    )


def _same_economy(a: Trajectory, b: Trajectory) -> bool:
    ea, eb = a.econ, b.econ
    T = b.steps
    if a.steps != T or ea.dt != eb.dt or ea.capital0 != eb.capital0:
        return False
    if not np.allclose([ea.rate(t) for t in range(T)], [eb.rate(t) for t in range(T)]):
        return False
    if [r.stock0 for r in a.resources] != [r.stock0 for r in b.resources]:
        return False
    if [r.growth for r in a.resources] != [r.growth for r in b.resources]:
        return False
    da, db = a.demand, b.demand
    fields = ("scale", "exponents", "intercepts", "slopes")
    return da.kind == db.kind and all(
        (getattr(da, f) is None and getattr(db, f) is None)
        or np.array_equal(getattr(da, f), getattr(db, f))
        for f in fields
    )


def grid_tolerance(oracle: OracleResult, config: OracleConfig) -> np.ndarray:
    """Half the relative adjusted-price change across one grid cell, per (t, j)."""
    traj = oracle.trajectory
    T, n = oracle.best_sequence.shape
    grids = config.grids(traj.resources)
    tol = np.full((T, n), np.inf)
    for t in range(T):
        Q = oracle.best_sequence[t]
        base = traj.adjusted_price[t]
        for j in range(n):
            cell = grids[j][1] - grids[j][0] if grids[j].size > 1 else 0.0
            changes = []
            for sgn in (1.0, -1.0):
                q = Q.copy()
                q[j] += sgn * cell
                try:
                    P = externality_margin(traj.demand, q).adjusted_price[j]
                    changes.append(abs(P - base[j]) / base[j])
                except DemandError:
                    continue
            if changes:
                tol[t, j] = 0.5 * max(changes)
    return tol


def compare(solver_result, oracle: OracleResult, config: OracleConfig) -> dict:
    """Gap between a solver path and the enumerated optimum.

    The solver's extraction is scored under the oracle's feasibility rule
    (largest constant consumption with nonnegative capital), so both
    consumption levels measure the same thing.
    """
    straj = solver_result.trajectory
    otraj = oracle.trajectory
    if not _same_economy(straj, otraj):
        raise ValueError("solver and oracle describe different economies")
    T = oracle.best_sequence.shape[0]
    Qs = straj.extraction[:T]
    cs = feasible_cbar(Qs, otraj.econ, otraj.resources, otraj.demand, tol=1e-12)
    cs = np.nan if cs is None else cs
    cstar = oracle.cbar
    gap = (cs - cstar) / cstar if cstar else np.nan
    P = otraj.adjusted_price[:T]
    dt = otraj.econ.dt
    gp = np.array([[growth_derivative(r.growth, max(x, 0.0)) for r, x in zip(otraj.resources, row)]
                   for row in otraj.stock[: T - 1]]) if T > 1 else np.zeros((0, otraj.n))
    fr = np.array([1.0 + otraj.econ.rate(t) * dt for t in range(T - 1)])[:, None]
    hot = P[1:] * (1.0 + gp * dt) / fr / P[:-1] - 1.0 if T > 1 else np.zeros((0, otraj.n))
    gtol = grid_tolerance(oracle, config)
    step_tol = np.maximum(gtol[:-1], gtol[1:]) if T > 1 else gtol[:0]
    hot_ok = bool(np.all(np.abs(hot) <= step_tol)) if hot.size else True
    return {
        "cbar_oracle": float(cstar),
        "cbar_solver": float(cs),
        "cbar_solver_hartwick": float(solver_result.cbar),
        "relative_gap": float(gap),
        "extraction_gap": (Qs - oracle.best_sequence).tolist(),
        "oracle_sequence": oracle.best_sequence.tolist(),
        "oracle_hotelling_rel": hot.tolist(),
        "grid_tolerance": step_tol.tolist(),
        "oracle_hotelling_within_grid": hot_ok,
        "max_gap": config.max_gap,
        "within_gap": bool(abs(gap) <= config.max_gap),
    }
