"""Constant-consumption extraction paths.

The adjusted price is stepped forward with the discrete Hotelling factor
(1 + r dt) / (1 + G' dt); market prices and extraction are recovered from
the demand system at each step, and the initial adjusted price is shot
until the terminal stock condition holds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketError,
    ConvergenceError,
    DemandError,
    DivergenceError,
    InfeasiblePath,
    RecoveryError,
)
from .externality import externality_margin
from .model import (
    DemandSystem,
    EconomySpec,
    growth_derivative,
    growth_eval,
)
from .rules import RuleResidualReport, Trajectory, residual_report

log = logging.getLogger(__name__)

MAX_RESOURCES = 3


@dataclass(frozen=True)
class SolverConfig:
    shooting_tolerance: float = 1e-8
    max_outer_iterations: int = 200
    bracket: tuple | None = None
    damping: float = 0.5
    inner_tolerance: float = 1e-12
    impact_scale: float = 1.0
    check_monotone: bool = False

    def __post_init__(self):
        from .errors import ConfigError

        if not (self.shooting_tolerance > 0 and self.inner_tolerance > 0):
            raise ConfigError("solver tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if self.max_outer_iterations < 1:
            raise ConfigError("max_outer_iterations must be positive")
        if self.bracket is not None and not 0 < self.bracket[0] < self.bracket[1]:
            raise ConfigError("bracket must be 0 < low < high")


@dataclass
class SolveResult:
    trajectory: Trajectory
    report: RuleResidualReport
    cbar: float
    initial_adjusted_price: np.ndarray
    iterations: int
    terminal_mismatch: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


def step_user_cost(X, P_t, P_next, r, gprime, dt=1.0):
    """Extraction solving P_t Q (1 + r dt) = P_next (1 + G' dt) (X - Q)."""
    if not (X > 0 and P_t > 0 and P_next > 0):
        raise ValueError("user-cost step needs positive stock and prices")
    grow = P_next * (1.0 + gprime * dt)
    if not grow > 0 or not 1.0 + r * dt > 0:
        raise ValueError("growth and interest factors must be positive")
    return grow * X / (P_t * (1.0 + r * dt) + grow)


# --- market state recovery ----------------------------------------------------

def _adjusted(demand, Q, s):
    mr = externality_margin(demand, Q, impact_scale=s)
    return mr.adjusted_price, mr.market_price, mr.margin


def recover_market_state(demand: DemandSystem, target, impact_scale=1.0, tol=1e-12):
    """Find extraction Q whose adjusted prices equal ``target``.

    Returns ``(Q, p, m)``. Raises :class:`RecoveryError` when the target is
    unattainable or marginal revenue is not decreasing in own extraction.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if target.shape != (demand.n,) or np.any(~(target > 0)):
        raise RecoveryError("adjusted prices must be positive", side="low")
    s = impact_scale
    if demand.kind == "isoelastic" and demand.is_diagonal:
        eta = np.diag(demand.exponents)
        c = 1.0 + s / eta
        if np.any(c <= 0):
            raise RecoveryError("marginal revenue is not positive; need own exponent below -1")
        Q = demand.scale * (target / c) ** eta
    elif demand.kind == "linear":
        B = demand.slopes
        M = B + s * B.T
        if np.any(np.diag(M) <= 0):
            raise RecoveryError("marginal revenue not decreasing in own extraction")
        Q = np.linalg.solve(M, demand.intercepts - target)
        if np.any(Q <= 0):
            raise RecoveryError(f"adjusted price {target} above attainable range", side="high")
    else:
        Q = _newton_log_extraction(demand, target, s, tol)
    try:
        P, p, m = _adjusted(demand, Q, s)
    except DemandError as exc:
        raise RecoveryError(str(exc)) from exc
    return Q, p, m


def _newton_log_extraction(demand, target, s, tol, max_iter=100):
    # With R = p Q and log p = eta^-1 (log Q - log A), adjusted prices are
    # P = (I + s eta^-T) R / Q, so the Jacobian in log Q is available exactly.
    n = demand.n
    inv = np.linalg.inv(demand.exponents)
    M = np.eye(n) + s * inv.T
    logA = np.log(demand.scale)

    def F(u):
        # trial steps may overflow; nonfinite residuals are rejected by the line search
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            Q = np.exp(u)
            R = np.exp(inv @ (u - logA)) * Q
            P = (M @ R) / Q
            dP = (M * R) @ (inv + np.eye(n)) / Q[:, None] - np.diag(P)
        return P / target - 1.0, dP / target[:, None]

    d = np.diag(demand.exponents)
    c = np.maximum(1.0 + s / d, 1e-3)
    u = np.log(demand.scale * (target / c) ** d)
    f, Jac = F(u)
    for _ in range(max_iter):
        if np.all(np.abs(f) <= tol):
            return np.exp(u)
        if not np.all(np.isfinite(f)) or np.any(np.diag(Jac) >= 0):
            raise RecoveryError("marginal revenue not decreasing in own extraction")
        try:
            step = np.linalg.solve(Jac, -f)
        except np.linalg.LinAlgError as exc:
            raise RecoveryError(f"adjusted-price recovery failed: {exc}") from exc
        lam = 1.0
        while lam > 1e-8:
            f_new, J_new = F(u + lam * step)
            if np.max(np.abs(f_new)) < np.max(np.abs(f)):
                break
            lam *= 0.5
        else:
            break
        u, f, Jac = u + lam * step, f_new, J_new
    raise RecoveryError("adjusted-price recovery did not converge")


# --- forward stepping -----------------------------------------------------------

def _growth(resources, X):
    Xc = np.maximum(X, 0.0)
    G = np.array([growth_eval(r.growth, x) for r, x in zip(resources, Xc)])
    Gp = np.array([growth_derivative(r.growth, x) for r, x in zip(resources, Xc)])
    return G, Gp


def assemble(econ, resources, demand, P, Q, p, m, X) -> Trajectory:
    """Income, capital, investment and consumption for a priced path.

    Constant consumption is fixed from the rule-implied investment at t=0.
    """
    T = X.shape[0] - 1
    dt = econ.dt
    G0, _ = _growth(resources, X[0])
    K = np.empty(T + 1)
    Y = np.empty(T + 1)
    K[0] = econ.capital0
    Y[0] = econ.rate(0) * K[0] + p[0] @ Q[0]
    cbar = Y[0] - P[0] @ (Q[0] - G0)
    for t in range(T):
        K[t + 1] = K[t] + (Y[t] - cbar) * dt
        Y[t + 1] = econ.rate(t + 1) * K[t + 1] + p[t + 1] @ Q[t + 1]
    return Trajectory(
        econ=econ,
        resources=list(resources),
        demand=demand,
        price=p,
        adjusted_price=P,
        margin=m,
        extraction=Q,
        stock=X,
        capital=K,
        income=Y,
        investment=Y - cbar,
        consumption=np.full(T + 1, cbar),
    )


def propagate(econ: EconomySpec, resources, demand: DemandSystem, P0, impact_scale=1.0,
              tol=1e-12) -> Trajectory:
    """Step adjusted prices forward from ``P0`` with the discrete Hotelling factor."""
    n = len(resources)
    T, dt = econ.horizon_steps, econ.dt
    P = np.empty((T + 1, n))
    Q = np.empty((T + 1, n))
    p = np.empty((T + 1, n))
    m = np.empty((T + 1, n))
    X = np.empty((T + 1, n))
    P[0] = np.atleast_1d(np.asarray(P0, dtype=float))
    X[0] = [r.stock0 for r in resources]
    floor = -tol * np.maximum(1.0, X[0])
    for t in range(T + 1):
        Q[t], p[t], m[t] = recover_market_state(demand, P[t], impact_scale, tol)
        if t == T:
            break
        G, Gp = _growth(resources, X[t])
        X[t + 1] = X[t] + (G - Q[t]) * dt
        if t + 1 < T and np.any(X[t + 1] < floor):
            raise InfeasiblePath(f"stock exhausted before the horizon at step {t + 1}")
        fg = 1.0 + Gp * dt
        if np.any(fg <= 0):
            raise InfeasiblePath(f"growth factor 1 + G' dt is nonpositive at step {t}")
        P[t + 1] = P[t] * (1.0 + econ.rate(t) * dt) / fg
    return assemble(econ, resources, demand, P, Q, p, m, X)


# --- shooting ----------------------------------------------------------------------

def _initial_guess(econ, resources, demand, s):
    from .externality import adjusted_prices

    Q = np.array([r.stock0 for r in resources]) / (econ.horizon_steps * econ.dt)
    try:
        P = adjusted_prices(demand, Q, s)
        if np.all(P > 0):
            # treat the average-rate price as the mid-horizon value of a Hotelling path
            half = econ.horizon_steps // 2
            growth = np.prod([1.0 + econ.rate(t) * econ.dt for t in range(half)])
            return P / growth
    except DemandError:
        pass
    return np.ones(len(resources))


def _terminal_tolerance(econ, config):
    if econ.terminal.tolerance is not None:
        return econ.terminal.tolerance
    return config.shooting_tolerance


def _check_conservation(econ, resources):
    targets = econ.terminal.targets(len(resources))
    for res, tgt in zip(resources, targets):
        if res.growth.kind == "zero" and tgt >= res.stock0:
            raise BracketError(
                f"resource {res.name!r}: target stock {tgt} unreachable without growth "
                f"and with positive extraction (initial stock {res.stock0})"
            )


def solve_constant_consumption(econ: EconomySpec, resources, demand: DemandSystem,
                               config: SolverConfig | None = None) -> SolveResult:
    config = config or SolverConfig()
    resources = list(resources)
    n = len(resources)
    if n != demand.n:
        raise ValueError(f"{n} resources but demand system has {demand.n}")
    if n > MAX_RESOURCES:
        raise ValueError(f"at most {MAX_RESOURCES} resources are supported")
    _check_conservation(econ, resources)
    if n == 1:
        return _solve_single(econ, resources, demand, config)
    return _solve_multi(econ, resources, demand, config)


def _solve_single(econ, resources, demand, config):
    s = config.impact_scale
    X0 = resources[0].stock0
    target = float(econ.terminal.targets(1)[0])
    tol = _terminal_tolerance(econ, config) * X0
    cache = {}

    def mismatch(u):
        if u in cache:
            return cache[u]
        try:
            traj = propagate(econ, resources, demand, [math.exp(u)], s, config.inner_tolerance)
            val = float(traj.stock[-1, 0]) - target
        except InfeasiblePath:
            traj, val = None, -math.inf
        except RecoveryError as exc:
            traj, val = None, (math.inf if exc.side == "high" else -math.inf)
        cache[u] = (val, traj)
        return val, traj

    if config.bracket is not None:
        lo, hi = math.log(config.bracket[0]), math.log(config.bracket[1])
    else:
        lo = hi = math.log(float(_initial_guess(econ, resources, demand, s)[0]))
    step = math.log(4.0)
    for _ in range(60):
        if mismatch(lo)[0] < 0:
            break
        lo -= step
        step *= 1.5
    else:
        raise BracketError("no initial adjusted price leaves too little terminal stock")
    step = math.log(4.0)
    for _ in range(60):
        if mismatch(hi)[0] >= 0:
            break
        hi += step
        step *= 1.5
    else:
        raise BracketError("no initial adjusted price reaches the terminal stock target")
    if config.check_monotone:
        _assert_monotone(mismatch, lo, hi)

    it = 0
    while True:
        f_hi, traj = mismatch(hi)
        if f_hi <= tol:
            break
        if it >= config.max_outer_iterations:
            raise ConvergenceError(
                f"bisection stopped after {it} iterations with terminal mismatch {f_hi:.3e}"
            )
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            if math.isinf(mismatch(lo)[0]) and math.isinf(f_hi):
                raise BracketError("terminal stock jumps from exhaustion to an unattainable price; "
                                   "no interior path exists")
            raise ConvergenceError("bracket collapsed before reaching tolerance")
        if mismatch(mid)[0] >= 0:
            hi = mid
        else:
            lo = mid
        it += 1
    log.debug("bisection converged in %d iterations, mismatch %.3e", it, f_hi)
    return _result(traj, it, f_hi / X0, np.array([math.exp(hi)]))


def _assert_monotone(mismatch, lo, hi, samples=8):
    vals = [mismatch(u)[0] for u in np.linspace(lo, hi, samples)]
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise AssertionError(f"terminal stock not monotone in the initial price: {vals}")


def _solve_multi(econ, resources, demand, config):
    s = config.impact_scale
    n = len(resources)
    X0 = np.array([r.stock0 for r in resources])
    targets = econ.terminal.targets(n)
    tol = _terminal_tolerance(econ, config)

    def evaluate(u):
        traj = propagate(econ, resources, demand, np.exp(u), s, config.inner_tolerance)
        return (traj.stock[-1] - targets) / X0, traj

    if config.bracket is not None:
        u = np.full(n, 0.5 * (math.log(config.bracket[0]) + math.log(config.bracket[1])))
    else:
        u = np.log(_initial_guess(econ, resources, demand, s))
    # walk the common price level until the whole path is attainable
    for _ in range(60):
        try:
            f, traj = evaluate(u)
            break
        except RecoveryError as exc:
            last = exc
            u = u - math.log(2.0) if exc.side == "high" else u + math.log(2.0)
        except InfeasiblePath as exc:
            last = exc
            u = u + math.log(2.0)
    else:
        raise BracketError(f"no attainable initial adjusted prices: {last}")

    # aim at the middle of [0, tol] so an accepted path never overshoots the target
    aim = 0.5 * tol
    h = 1e-6
    for it in range(config.max_outer_iterations + 1):
        err = float(np.max(np.abs(f - aim)))
        if err <= aim:
            return _result(traj, it, float(np.max(np.abs(f))), np.exp(u))
        if it == config.max_outer_iterations:
            break
        slope = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            try:
                slope[j] = (evaluate(u + e)[0][j] - f[j]) / h
            except (InfeasiblePath, RecoveryError):
                slope[j] = (f[j] - evaluate(u - e)[0][j]) / h
        if np.any(slope <= 0):
            raise DivergenceError(f"terminal stock not increasing in own price (slopes {slope})")
        step = -(f - aim) / slope
        lam = config.damping
        while lam > 1e-6:
            try:
                f_new, traj_new = evaluate(u + lam * step)
                if np.max(np.abs(f_new - aim)) < err:
                    break
            except (InfeasiblePath, RecoveryError):
                pass
            lam *= 0.5
        else:
            raise DivergenceError(
                f"fixed point stalled at iteration {it} with terminal mismatch {err:.3e}"
            )
        u, f, traj = u + lam * step, f_new, traj_new
    raise ConvergenceError(
        f"fixed point reached {config.max_outer_iterations} iterations, mismatch {err:.3e}"
    )


def _result(traj, iterations, mismatch, P0):
    report = residual_report(traj)
    return SolveResult(
        trajectory=traj,
        report=report,
        cbar=float(traj.consumption[0]),
        initial_adjusted_price=P0,
        iterations=iterations,
        terminal_mismatch=float(mismatch),
        diagnostics={"min_capital": float(traj.capital.min())},
    )


def solve_user_cost_mode(econ: EconomySpec, resources, demand: DemandSystem, price_path,
                         impact_scale=1.0) -> Trajectory:
    """Extraction from the discrete user-cost rule under an exogenous adjusted-price path.

    The path has one row per step t = 0..T (T may differ from the economy
    horizon). Row T extraction assumes the path continues at the Hotelling
    factor. Market prices and margins come from demand at the chosen
    extraction, so they need not reproduce the exogenous adjusted prices.
    """
    resources = list(resources)
    n = len(resources)
    P = np.asarray(price_path, dtype=float).reshape(-1, n)
    if np.any(~(P > 0)):
        raise ValueError("adjusted price path must be positive")
    T, dt = P.shape[0] - 1, econ.dt
    if T < 1:
        raise ValueError("price path needs at least two entries")
    X = np.empty((T + 1, n))
    Q = np.empty((T + 1, n))
    X[0] = [r.stock0 for r in resources]
    for t in range(T + 1):
        G, Gp = _growth(resources, X[t])
        r = econ.rate(t)
        nxt = P[t + 1] if t < T else P[t] * (1.0 + r * dt) / (1.0 + Gp * dt)
        for j in range(n):
            Q[t, j] = step_user_cost(X[t, j], P[t, j], nxt[j], r, Gp[j], dt)
        if t < T:
            X[t + 1] = X[t] + (G - Q[t]) * dt
    p = np.empty_like(Q)
    m = np.empty_like(Q)
    for t in range(T + 1):
        mr = externality_margin(demand, Q[t], impact_scale)
        p[t], m[t] = mr.market_price, mr.margin
    return assemble(econ, resources, demand, P, Q, p, m, X)
