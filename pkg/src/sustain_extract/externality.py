"""Cross-price elasticities, the externality price margin and adjusted prices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DemandError
from .model import DemandSystem, demand_jacobian, inverse_demand


@dataclass(frozen=True)
class ElasticityReport:
    epsilon: np.ndarray  # dq_j/dp_k * p_k / q_j
    inverse_elasticity: np.ndarray  # dp_k/dQ_j * Q_j / p_k
    price: np.ndarray
    quantity: np.ndarray


@dataclass(frozen=True)
class MarginReport:
    margin: np.ndarray
    adjusted_price: np.ndarray
    market_price: np.ndarray


def _point(demand, Q):
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    if np.any(Q <= 0):
        raise DemandError("elasticities need strictly positive extraction")
    p = inverse_demand(demand, Q)
    return Q, p


def demand_elasticities(demand: DemandSystem, Q) -> ElasticityReport:
    Q, p = _point(demand, Q)
    J = demand_jacobian(demand, Q)
    try:
        # J.T is dp/dQ in the usual (row = price) layout
        dq_dp = np.linalg.inv(J.T)
    except np.linalg.LinAlgError:
        raise DemandError("inverse-demand Jacobian is singular") from None
    eps = dq_dp * p[None, :] / Q[:, None]
    inv_el = J * Q[:, None] / p[None, :]
    return ElasticityReport(eps, inv_el, p, Q)


def margin_from_jacobian(J: np.ndarray, p: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """m_j = (1/p_j) sum_k J[j, k] Q_k, own term included."""
    return (J @ Q) / p


def externality_margin(
    demand: DemandSystem,
    Q,
    impact_scale: float = 1.0,
    form: str = "inverse",
    price=None,
) -> MarginReport:
    """Margin m_j and adjusted price p_j (1 + m_j) at extraction Q.

    ``impact_scale`` multiplies every price-impact entry of the Jacobian;
    0 is the perfectly elastic limit. ``form="reciprocal"`` uses the
    elementwise reciprocal of the demand elasticity matrix instead of the
    inverse-demand elasticities (audit comparison only; zero elasticities
    contribute nothing). ``price`` overrides the model price, e.g. when
    auditing observed data.
    """
    Q, p_model = _point(demand, Q)
    p = p_model if price is None else np.asarray(price, dtype=float)
    if form == "inverse":
        J = demand_jacobian(demand, Q)
        m = impact_scale * margin_from_jacobian(J, p, Q)
    elif form == "reciprocal":
        eps = demand_elasticities(demand, Q).epsilon
        with np.errstate(divide="ignore"):
            recip = np.where(eps != 0, 1.0 / eps, 0.0)
        rev = p * Q
        m = impact_scale * (recip @ rev) / rev
    else:
        raise ValueError(f"unknown margin form {form!r}")
    return MarginReport(m, p * (1.0 + m), p)


def adjusted_prices(demand: DemandSystem, Q, impact_scale: float = 1.0) -> np.ndarray:
    return externality_margin(demand, Q, impact_scale).adjusted_price


def total_revenue(demand: DemandSystem, Q) -> float:
    Q = np.asarray(Q, dtype=float)
    return float(inverse_demand(demand, Q) @ Q)


def marginal_revenue_check(demand: DemandSystem, Q, j: int) -> float:
    """Adjusted price minus a central difference of total revenue in Q_j."""
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    h = max(1e-6, 1e-6 * Q[j])
    up, dn = Q.copy(), Q.copy()
    up[j] += h
    dn[j] -= h
    dR = (total_revenue(demand, up) - total_revenue(demand, dn)) / (2 * h)
    return float(adjusted_prices(demand, Q)[j] - dR)
