"""Rule residuals over a trajectory: modified Hotelling, modified Hartwick,
discrete user-cost and present-value relations, and costate reconstruction.

All price symbols are externality-adjusted prices. G' is evaluated at the
start-of-period stock.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DemandSystem,
    EconomySpec,
    ResourceSpec,
    growth_derivative,
    growth_eval,
)


@dataclass
class Trajectory:
    """Time-indexed record on rows t = 0..T.

    Per-resource arrays have shape (T+1, n); aggregate arrays (T+1,).
    Stocks and capital at row T are end-of-horizon values; flows at row T
    describe the market state at the terminal adjusted price and may be NaN
    when no such state exists (oracle sequences).
    """

    econ: EconomySpec
    resources: list[ResourceSpec]
    demand: DemandSystem
    price: np.ndarray
    adjusted_price: np.ndarray
    margin: np.ndarray
    extraction: np.ndarray
    stock: np.ndarray
    capital: np.ndarray
    income: np.ndarray
    investment: np.ndarray
    consumption: np.ndarray

    @property
    def steps(self) -> int:
        return self.stock.shape[0] - 1

    @property
    def n(self) -> int:
        return self.stock.shape[1]

    def _per_resource(self, fn):
        X = np.maximum(self.stock, 0.0)
        out = np.empty_like(X)
        for j, res in enumerate(self.resources):
            out[:, j] = fn(res.growth, X[:, j])
        return out

    @property
    def growth(self) -> np.ndarray:
        return self._per_resource(growth_eval)

    @property
    def growth_rate(self) -> np.ndarray:
        return self._per_resource(growth_derivative)

    def rates(self) -> np.ndarray:
        return np.array([self.econ.rate(t) for t in range(self.steps + 1)])


@dataclass
class RuleResidualReport:
    hotelling: np.ndarray  # (T, n) relative
    present_value: np.ndarray  # (T, n) currency per unit
    user_cost: np.ndarray  # (T, n) currency
    hartwick: np.ndarray  # (T+1,) currency per time
    drift: np.ndarray  # (T+1,) per-row consumption drift
    consumption_drift: float
    summary: dict = field(default_factory=dict)


@dataclass
class CostateSeries:
    pi: np.ndarray
    psi: np.ndarray
    beta: np.ndarray
    psi_residual: np.ndarray  # (T, n)


def _factors(traj: Trajectory, t: int, j: int):
    dt = traj.econ.dt
    gp = float(traj.growth_rate[t, j])
    return 1.0 + traj.econ.rate(t) * dt, 1.0 + gp * dt


def present_value_residual(traj: Trajectory, t: int, j: int) -> float:
    if not 0 <= t < traj.steps:
        raise IndexError(f"step {t} has no successor")
    P = traj.adjusted_price
    if not P[t, j] > 0:
        raise ValueError(f"adjusted price at ({t}, {j}) is not positive")
    fr, fg = _factors(traj, t, j)
    return float(P[t + 1, j] * fg / fr - P[t, j])


def hotelling_residual(traj: Trajectory, t: int, j: int) -> float:
    return present_value_residual(traj, t, j) / float(traj.adjusted_price[t, j])


def user_cost_rule_residual(traj: Trajectory, t: int, j: int) -> float:
    if not 0 <= t < traj.steps:
        raise IndexError(f"step {t} has no successor")
    P, X, Q = traj.adjusted_price, traj.stock, traj.extraction
    fr, fg = _factors(traj, t, j)
    return float(P[t, j] * Q[t, j] * fr - P[t + 1, j] * fg * (X[t, j] - Q[t, j]))


def hartwick_investment(traj: Trajectory, t: int) -> float:
    """Rule-implied investment sum_j P_j (Q_j - G_j(X_j)) at step t."""
    return float(traj.adjusted_price[t] @ (traj.extraction[t] - traj.growth[t]))


def consumption_series(traj: Trajectory):
    C = traj.income - traj.investment
    drift = np.abs(C - C[0]) / max(1.0, abs(C[0]))
    return C, float(np.nanmax(drift)), drift


def costates(traj: Trajectory) -> CostateSeries:
    r = traj.rates()[:-1]
    beta = np.concatenate([[1.0], np.cumprod(1.0 / (1.0 + r * traj.econ.dt))])
    pi = beta.copy()
    psi = pi[:, None] * traj.adjusted_price
    fg = 1.0 + traj.growth_rate[:-1] * traj.econ.dt
    psi_res = psi[1:] - psi[:-1] / fg
    return CostateSeries(pi, psi, beta, psi_res)


def costate_hotelling_link(traj: Trajectory, hotelling: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """psi-dynamics residual implied by the Hotelling residuals.

    psi(t+1) - psi(t)/(1+G'dt) = pi(t) P(t) h(t) / (1+G'dt).
    """
    fg = 1.0 + traj.growth_rate[:-1] * traj.econ.dt
    return pi[:-1, None] * traj.adjusted_price[:-1] * hotelling / fg


def residual_report(traj: Trajectory) -> RuleResidualReport:
    T = traj.steps
    dt = traj.econ.dt
    P = traj.adjusted_price
    fr = (1.0 + traj.rates()[:T] * dt)[:, None]
    fg = 1.0 + traj.growth_rate[:T] * dt
    pv = P[1:] * fg / fr - P[:-1]
    hot = pv / P[:-1]
    uc = P[:-1] * traj.extraction[:-1] * fr - P[1:] * fg * (traj.stock[:-1] - traj.extraction[:-1])
    istar = np.einsum("tj,tj->t", P, traj.extraction - traj.growth)
    hart = traj.investment - istar
    _, cdrift, drift = consumption_series(traj)
    summary = {
        "max_hotelling_rel": _absmax(hot),
        "max_present_value_abs": _absmax(pv),
        "max_user_cost_abs": _absmax(uc),
        "max_hartwick_abs": _absmax(hart),
        "consumption_drift": cdrift,
    }
    return RuleResidualReport(hot, pv, uc, hart, drift, cdrift, summary)


def _absmax(a) -> float:
    a = np.abs(np.asarray(a, dtype=float))
    return float(np.nanmax(a)) if a.size else 0.0
