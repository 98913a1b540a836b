"""Constant-consumption extraction schedules with externality-adjusted resource prices."""
from .externality import (
    adjusted_prices,
    demand_elasticities,
    externality_margin,
    marginal_revenue_check,
)
from .model import (
    DemandSystem,
    EconomySpec,
    GrowthFunction,
    ResourceSpec,
    TerminalCondition,
    demand_jacobian,
    discount_factor,
    growth_derivative,
    growth_eval,
    inverse_demand,
)
from .oracle import OracleConfig, compare, enumerate_maxmin, feasible_cbar
from .rules import (
    Trajectory,
    costates,
    hartwick_investment,
    hotelling_residual,
    present_value_residual,
    residual_report,
    user_cost_rule_residual,
)
from .solver import (
    SolverConfig,
    propagate,
    recover_market_state,
    solve_constant_consumption,
    solve_user_cost_mode,
    step_user_cost,
)

__version__ = "0.1.0"
