from erl.core.errors import (
    CompositionRangeError,
    CoverageError,
    ERLError,
    IdentityViolationError,
    IncompatibleTasksError,
    InvalidTaskError,
    NumericFailureError,
    ShapeMismatchError,
    UnsolvedInputError,
)
from erl.core.mdp import (
    PolicyTable,
    RewardTable,
    TabularDynamics,
    Task,
    TaskEnvironment,
    ValidationReport,
    Violation,
    expected_reward,
    expected_rewards,
    require_valid_task,
    uniform_prior,
    validate_task,
)
from erl.core.solver import (
    ConvergenceTrace,
    PolicyEvaluation,
    QTable,
    SoftSolution,
    absorbing_states,
    bellman_error,
    bellman_residual,
    extract_policy,
    extract_value,
    random_initialization,
    soft_backup,
    soft_policy_evaluation,
    solve,
)

__all__ = [
    "CompositionRangeError",
    "CoverageError",
    "ERLError",
    "IdentityViolationError",
    "IncompatibleTasksError",
    "InvalidTaskError",
    "NumericFailureError",
    "ShapeMismatchError",
    "UnsolvedInputError",
    "PolicyTable",
    "RewardTable",
    "TabularDynamics",
    "Task",
    "TaskEnvironment",
    "ValidationReport",
    "Violation",
    "expected_reward",
    "expected_rewards",
    "require_valid_task",
    "uniform_prior",
    "validate_task",
    "ConvergenceTrace",
    "PolicyEvaluation",
    "QTable",
    "SoftSolution",
    "absorbing_states",
    "bellman_error",
    "bellman_residual",
    "extract_policy",
    "extract_value",
    "random_initialization",
    "soft_backup",
    "soft_policy_evaluation",
    "solve",
]
