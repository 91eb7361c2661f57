from erl.core.mdp import PolicyTable, RewardTable, TabularDynamics, Task, TaskEnvironment
from erl.core.solver import ConvergenceTrace, SoftSolution, soft_policy_evaluation, solve
from erl.shaping.potential import Potential, shape
from erl.transfer.composition import CompositionFunction, CompositionSpec, compose
from erl.transfer.corrective import CorrectiveProblem, combine, reward_change_corrective

__version__ = "0.1.0"
__all__ = [
    "PolicyTable",
    "RewardTable",
    "TabularDynamics",
    "Task",
    "TaskEnvironment",
    "ConvergenceTrace",
    "SoftSolution",
    "soft_policy_evaluation",
    "solve",
    "Potential",
    "shape",
    "CompositionFunction",
    "CompositionSpec",
    "compose",
    "CorrectiveProblem",
    "combine",
    "reward_change_corrective",
]
