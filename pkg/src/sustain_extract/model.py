"""Economy primitives: time grid, interest schedule, resource growth and inverse demand.

Jacobian orientation used throughout the package: ``J[j, k] = dp_k / dQ_j``,
i.e. rows are indexed by the extraction being varied.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DemandError

INNER_TOL = 1e-12
INNER_MAX_ITER = 100


@dataclass(frozen=True)
class TerminalCondition:
    kind: str = "exhaust"
    target_stocks: tuple | None = None
    tolerance: float | None = None

    def __post_init__(self):
        if self.kind not in ("exhaust", "stock_target"):
            raise ConfigError(f"unknown terminal kind {self.kind!r}")
        if self.kind == "stock_target":
            if self.target_stocks is None:
                raise ConfigError("stock_target terminal requires target_stocks")
            if any(s < 0 for s in self.target_stocks):
                raise ConfigError("target_stocks must be nonnegative")
        elif self.target_stocks is not None:
            raise ConfigError("target_stocks only allowed with kind='stock_target'")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("terminal tolerance must be positive")

    def targets(self, n: int) -> np.ndarray:
        if self.kind == "exhaust":
            return np.zeros(n)
        t = np.asarray(self.target_stocks, dtype=float)
        if t.shape != (n,):
            raise ConfigError(f"expected {n} target stocks, got {t.size}")
        return t


@dataclass(frozen=True)
class EconomySpec:
    """Discrete time grid with an exogenous interest schedule.

    ``interest_rate`` is either a scalar or one rate per step. The terminal
    row t = horizon_steps reuses the final rate where one is needed.
    """

    horizon_steps: int
    dt: float = 1.0
    interest_rate: float | tuple = 0.0
    capital0: float = 0.0
    terminal: TerminalCondition = field(default_factory=TerminalCondition)

    def __post_init__(self):
        if int(self.horizon_steps) != self.horizon_steps or self.horizon_steps < 2:
            raise ConfigError("horizon_steps must be an integer >= 2")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.capital0 >= 0:
            raise ConfigError("capital0 must be nonnegative")
        if not np.isscalar(self.interest_rate):
            rates = tuple(float(r) for r in self.interest_rate)
            if len(rates) != self.horizon_steps:
                raise ConfigError(
                    f"interest_rate sequence needs {self.horizon_steps} entries, got {len(rates)}"
                )
            object.__setattr__(self, "interest_rate", rates)
        if np.any(self.rates <= -1.0 / self.dt):
            raise ConfigError("every interest rate must exceed -1/dt")

    @property
    def rates(self) -> np.ndarray:
        if np.isscalar(self.interest_rate):
            return np.full(self.horizon_steps, float(self.interest_rate))
        return np.asarray(self.interest_rate, dtype=float)

    def rate(self, t: int) -> float:
        rates = self.rates
        return float(rates[min(t, len(rates) - 1)])


def discount_factor(econ: EconomySpec, t: int) -> float:
    """beta(t) = prod_{s<t} 1 / (1 + r_s dt), with beta(0) = 1."""
    if not 0 <= t <= econ.horizon_steps:
        raise IndexError(f"step {t} outside [0, {econ.horizon_steps}]")
    return float(np.prod(1.0 / (1.0 + econ.rates[:t] * econ.dt)))


def discount_factors(econ: EconomySpec) -> np.ndarray:
    """All beta(t) for t = 0..T."""
    steps = 1.0 / (1.0 + econ.rates * econ.dt)
    return np.concatenate([[1.0], np.cumprod(steps)])


# --- growth -----------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFunction:
    kind: str = "zero"
    rate: float = 0.0
    capacity: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "exponential", "logistic"):
            raise ConfigError(f"unknown growth kind {self.kind!r}")
        if self.kind == "logistic" and not (self.capacity is not None and self.capacity > 0):
            raise ConfigError("logistic growth needs a positive capacity")


def _check_stock(x):
    if np.any(np.asarray(x) < 0):
        raise ValueError(f"stock must be nonnegative, got {x}")


def growth_eval(growth: GrowthFunction, x):
    _check_stock(x)
    if growth.kind == "zero":
        return 0.0 * x
    if growth.kind == "exponential":
        return growth.rate * x
    return growth.rate * x * (1.0 - x / growth.capacity)


def growth_derivative(growth: GrowthFunction, x):
    _check_stock(x)
    if growth.kind == "zero":
        return 0.0 * x
    if growth.kind == "exponential":
        return growth.rate + 0.0 * x
    return growth.rate * (1.0 - 2.0 * x / growth.capacity)


@dataclass(frozen=True)
class ResourceSpec:
    name: str
    stock0: float
    growth: GrowthFunction = field(default_factory=GrowthFunction)

    def __post_init__(self):
        if not self.stock0 > 0:
            raise ConfigError(f"resource {self.name!r}: stock0 must be positive")


# --- demand -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DemandSystem:
    """Parametric inverse demand p(Q).

    isoelastic: demand q_j = A_j prod_k p_k^eta_jk, inverted numerically.
    linear: p = a - B Q.
    Build through :meth:`isoelastic` or :meth:`linear`.
    """

    kind: str
    scale: np.ndarray | None = None
    exponents: np.ndarray | None = None
    intercepts: np.ndarray | None = None
    slopes: np.ndarray | None = None

    @classmethod
    def isoelastic(cls, scale, exponents) -> "DemandSystem":
        A = np.atleast_1d(np.asarray(scale, dtype=float))
        eta = np.atleast_2d(np.asarray(exponents, dtype=float))
        n = A.size
        if eta.shape != (n, n):
            raise ConfigError(f"exponent matrix must be {n}x{n}")
        if np.any(A <= 0):
            raise ConfigError("isoelastic scales must be positive")
        try:
            inv = np.linalg.inv(eta)
        except np.linalg.LinAlgError:
            raise ConfigError("exponent matrix is singular") from None
        # sign of dp_j/dQ_j is the sign of (eta^-1)_jj everywhere
        if np.any(np.diag(inv) >= 0):
            raise DemandError("inverse demand not decreasing in own extraction")
        A.setflags(write=False)
        eta.setflags(write=False)
        return cls("isoelastic", scale=A, exponents=eta)

    @classmethod
    def linear(cls, intercepts, slopes) -> "DemandSystem":
        a = np.atleast_1d(np.asarray(intercepts, dtype=float))
        B = np.atleast_2d(np.asarray(slopes, dtype=float))
        n = a.size
        if B.shape != (n, n):
            raise ConfigError(f"slope matrix must be {n}x{n}")
        if np.any(a <= 0):
            raise ConfigError("linear intercepts must be positive")
        if np.any(np.diag(B) <= 0):
            raise DemandError("inverse demand not decreasing in own extraction")
        a.setflags(write=False)
        B.setflags(write=False)
        return cls("linear", intercepts=a, slopes=B)

    @property
    def n(self) -> int:
        return (self.scale if self.kind == "isoelastic" else self.intercepts).size

    @property
    def is_diagonal(self) -> bool:
        M = self.exponents if self.kind == "isoelastic" else self.slopes
        return bool(np.all(M == np.diag(np.diag(M))))

    def demand(self, p) -> np.ndarray:
        """Forward demand q(p); isoelastic only."""
        if self.kind != "isoelastic":
            return np.linalg.solve(self.slopes, self.intercepts - np.asarray(p, float))
        p = np.asarray(p, dtype=float)
        return self.scale * np.exp(self.exponents @ np.log(p))

    def prices_batch(self, Q: np.ndarray) -> np.ndarray:
        """Vectorised p(Q) over leading axes, closed form, no validation.

        Used for enumeration; zero extraction gives ``inf`` for isoelastic.
        """
        Q = np.asarray(Q, dtype=float)
        if self.kind == "linear":
            return self.intercepts - Q @ self.slopes.T
        with np.errstate(divide="ignore"):
            logq = np.log(Q) - np.log(self.scale)
        return np.exp(logq @ np.linalg.inv(self.exponents).T)


def _as_vector(demand: DemandSystem, Q) -> np.ndarray:
    Q = np.atleast_1d(np.asarray(Q, dtype=float))
    if Q.shape != (demand.n,):
        raise ValueError(f"expected {demand.n} extraction values, got shape {Q.shape}")
    return Q


def _invert_isoelastic(demand: DemandSystem, Q: np.ndarray, tol: float) -> np.ndarray:
    eta = demand.exponents
    if demand.is_diagonal:
        return (Q / demand.scale) ** (1.0 / np.diag(eta))
    target = np.log(Q) - np.log(demand.scale)

    def resid(u):
        return eta @ u - target

    u = np.zeros_like(Q)
    f = resid(u)
    for _ in range(INNER_MAX_ITER):
        p = np.exp(u)
        if np.all(np.abs(demand.demand(p) - Q) <= tol * np.maximum(1.0, Q)):
            return p
        step = np.linalg.solve(eta, -f)
        lam = 1.0
        while lam > 1e-10:
            f_new = resid(u + lam * step)
            if np.linalg.norm(f_new) < np.linalg.norm(f):
                break
            lam *= 0.5
        else:
            break
        u, f = u + lam * step, f_new
    raise DemandError("isoelastic inversion did not converge")


def inverse_demand(demand: DemandSystem, Q, tol: float = INNER_TOL) -> np.ndarray:
    Q = _as_vector(demand, Q)
    if demand.kind == "linear":
        if np.any(Q < 0):
            raise DemandError("extraction must be nonnegative")
        p = demand.intercepts - demand.slopes @ Q
    else:
        if np.any(Q <= 0):
            raise DemandError("isoelastic demand needs strictly positive extraction")
        p = _invert_isoelastic(demand, Q, tol)
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise DemandError(f"nonpositive price {p} at extraction {Q}")
    return p


def demand_jacobian(demand: DemandSystem, Q, method: str = "analytic") -> np.ndarray:
    """Return ``J[j, k] = dp_k / dQ_j`` at Q.

    ``method="fd"`` gives central differences with step max(1e-6, 1e-6 Q_j).
    """
    Q = _as_vector(demand, Q)
    if method == "fd":
        J = np.empty((demand.n, demand.n))
        for j in range(demand.n):
            h = max(1e-6, 1e-6 * Q[j])
            up, dn = Q.copy(), Q.copy()
            up[j] += h
            dn[j] -= h
            J[j] = (inverse_demand(demand, up) - inverse_demand(demand, dn)) / (2 * h)
    elif demand.kind == "linear":
        inverse_demand(demand, Q)
        J = -demand.slopes.T.copy()
    else:
        p = inverse_demand(demand, Q)
        dq_dp = demand.exponents * Q[:, None] / p[None, :]
        try:
            J = np.linalg.inv(dq_dp).T
        except np.linalg.LinAlgError:
            raise DemandError("demand Jacobian is singular") from None
    if np.any(np.diag(J) >= 0):
        raise DemandError("inverse demand not decreasing in own extraction")
    return J
