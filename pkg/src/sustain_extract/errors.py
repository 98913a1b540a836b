"""Exception hierarchy. Each class carries a stable machine-readable ``code``."""


class SustainError(Exception):
    code = "error"


class ConfigError(SustainError, ValueError):
    code = "config_error"


class DemandError(SustainError, ValueError):
    """Inverse demand is undefined, nonpositive, or not own-price monotone."""

    code = "demand_error"


class RecoveryError(SustainError):
    """No extraction vector reproduces the requested adjusted prices.

    ``side`` is ``"high"`` when the target lies above the attainable range
    (extraction would have to be nonpositive) and ``"low"`` otherwise.
    """

    code = "recovery_failure"

    def __init__(self, message, side="low"):
        super().__init__(message)
        self.side = side


class InfeasiblePath(SustainError):
    code = "infeasible_path"


class BracketError(SustainError):
    code = "bracket_failure"


class ConvergenceError(SustainError):
    code = "max_iterations"


class DivergenceError(SustainError):
    code = "divergence"


class GuardError(SustainError):
    code = "guard_exceeded"


class InputError(ConfigError):
    code = "input_error"
