"""Corrective value functions for reward, prior and dynamics changes.

Each constructor returns a derived task whose optimal Q-function K* satisfies
Q~* = base_q + K*. The derived task keeps the original dynamics (or the new ones for
a dynamics change), uses the reward kappa, and uses the solved task's soft-optimal
policy as its prior.
"""
import logging
from enum import Enum
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel

from erl.core.errors import (
    IdentityViolationError,
    NumericFailureError,
    ShapeMismatchError,
    UnsolvedInputError,
)
from erl.core.mdp import PolicyTable, RewardTable, TabularDynamics, Task, expected_rewards
from erl.core.solver import (
    ConvergenceTrace,
    QTable,
    SoftSolution,
    bellman_residual,
    extract_policy,
    extract_value,
)

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-8


class CorrectionKind(str, Enum):
    REWARD_CHANGE = "reward-change"
    DYNAMICS_CHANGE = "dynamics-change"
    COMPOSITION = "composition"


class CorrectiveProblem(BaseModel):
    task: Task
    base_q: np.ndarray
    original_prior: PolicyTable
    description: CorrectionKind

    class Config:
        arbitrary_types_allowed = True
        frozen = True
        use_enum_values = True

    @property
    def base_v(self) -> np.ndarray:
        return extract_value(self.base_q, self.original_prior, self.task.beta)


def require_solved(solution: SoftSolution, task: Task, slack: float = 1e-12) -> None:
    if solution.q.shape != (task.num_states, task.num_actions):
        raise ShapeMismatchError(
            f"solution shape {solution.q.shape} does not match task ({task.num_states}, "
            f"{task.num_actions})"
        )
    residual = bellman_residual(solution.q, task)
    if residual > solution.trace.tolerance + slack:
        raise UnsolvedInputError(
            f"solution does not solve the base task: residual {residual:.3e} > "
            f"tolerance {solution.trace.tolerance:.3e}"
        )


def _reward_values(reward: Union[RewardTable, np.ndarray]) -> np.ndarray:
    return reward.values if isinstance(reward, RewardTable) else RewardTable(values=reward).values


def _worst(diff: np.ndarray) -> Tuple[float, Tuple[int, ...]]:
    cell = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return float(diff[cell]), tuple(int(i) for i in cell)


def check_identity(name: str, actual: np.ndarray, expected: np.ndarray, tolerance: float) -> float:
    residual, cell = _worst(np.abs(np.asarray(actual) - np.asarray(expected)))
    if residual > tolerance:
        raise IdentityViolationError(name, residual, tolerance, cell)
    return residual


def corrective_prior(policy: PolicyTable, original_prior: PolicyTable) -> PolicyTable:
    """``policy`` as the prior of a corrective task.

    A softmax that underflowed to zero where the original prior is positive would
    leave the corrective task without that action, so it is rejected here.
    """
    lost = (policy.probs <= 0.0) & (original_prior.probs > 0.0)
    if np.any(lost):
        cell = tuple(int(i) for i in np.argwhere(lost)[0])
        raise NumericFailureError(
            "soft-optimal policy underflowed to zero where the prior is positive; "
            "lower beta or rescale the rewards",
            cell=cell,
        )
    return policy


def reward_change_corrective(
    solution: SoftSolution, new_reward: Union[RewardTable, np.ndarray], base_task: Task
) -> CorrectiveProblem:
    require_solved(solution, base_task)
    new_values = _reward_values(new_reward)
    if new_values.shape != base_task.reward.shape:
        raise ShapeMismatchError(
            f"new reward shape {new_values.shape} != base reward shape {base_task.reward.shape}"
        )
    kappa = new_values - base_task.reward.values
    return CorrectiveProblem(
        task=base_task.replace(
            reward=kappa, prior=corrective_prior(solution.policy, base_task.prior)
        ),
        base_q=solution.q,
        original_prior=base_task.prior,
        description=CorrectionKind.REWARD_CHANGE,
    )


def combine(
    corrective: CorrectiveProblem,
    k_star: Union[QTable, SoftSolution],
    tolerance: float = IDENTITY_TOLERANCE,
) -> SoftSolution:
    """Q~ = base_q + K*, with V~ and pi~ recomputed under the original prior."""
    if isinstance(k_star, SoftSolution):
        k, trace = k_star.q, k_star.trace
    else:
        k, trace = np.asarray(k_star, dtype=float), ConvergenceTrace(tolerance=tolerance)

    residual = bellman_residual(k, corrective.task)
    if residual > tolerance:
        raise IdentityViolationError("corrective fixed point", residual, tolerance)

    beta = corrective.task.beta
    q_tilde = corrective.base_q + k
    v_tilde = extract_value(q_tilde, corrective.original_prior, beta)
    policy_tilde = extract_policy(q_tilde, corrective.original_prior, beta)

    v_additive = corrective.base_v + extract_value(k, corrective.task.prior, beta)
    policy_k = extract_policy(k, corrective.task.prior, beta)
    check_identity("value decomposition", v_tilde, v_additive, tolerance)
    check_identity("policy equality", policy_tilde.probs, policy_k.probs, tolerance)

    # the combined table is only vouched for up to the identity tolerance
    trace = trace.model_copy(update={"tolerance": max(trace.tolerance, tolerance)})
    return SoftSolution(q=q_tilde, v=v_tilde, policy=policy_tilde, trace=trace)


def prior_change(task: Task, new_prior: PolicyTable) -> Tuple[Task, np.ndarray]:
    """Move a task to prior pi1 while keeping its optimal policy.

    Returns the adjusted task and the shift (1/beta) log(pi0/pi1), which is exactly
    Q~* - Q*.
    """
    if new_prior.shape != task.prior.shape:
        raise ShapeMismatchError(f"new prior shape {new_prior.shape} != {task.prior.shape}")
    if not new_prior.is_strictly_positive():
        raise ValueError("new prior must be strictly positive")
    shift = np.log(task.prior.probs / new_prior.probs) / task.beta
    adjusted = task.replace(reward=task.reward.values + shift[:, :, None], prior=new_prior)
    return adjusted, shift


def _check_dynamics(new_dynamics: TabularDynamics, base_task: Task) -> None:
    if new_dynamics.transition.shape != base_task.dynamics.transition.shape:
        raise ShapeMismatchError(
            f"new dynamics shape {new_dynamics.transition.shape} != "
            f"{base_task.dynamics.transition.shape}"
        )


def _dynamics_shift(
    solution: SoftSolution, new_dynamics: TabularDynamics, base_task: Task
) -> np.ndarray:
    """E_q[r] - E_p[r] + gamma (E_q - E_p) V*, an (s, a) table."""
    reward_shift = expected_rewards(base_task.replace(dynamics=new_dynamics)) - expected_rewards(
        base_task
    )
    value_shift = new_dynamics.expectation(solution.v) - base_task.dynamics.expectation(solution.v)
    return reward_shift + base_task.gamma * value_shift


def dynamics_change_corrective(
    solution: SoftSolution, new_dynamics: TabularDynamics, base_task: Task
) -> CorrectiveProblem:
    require_solved(solution, base_task)
    _check_dynamics(new_dynamics, base_task)
    # An s'-dependent reward is first reduced to its p-expectation; the reward term
    # of kappa then accounts for the same reward being averaged under q instead.
    kappa = _dynamics_shift(solution, new_dynamics, base_task)
    return CorrectiveProblem(
        task=base_task.replace(
            dynamics=new_dynamics,
            reward=kappa,
            prior=corrective_prior(solution.policy, base_task.prior),
        ),
        base_q=solution.q,
        original_prior=base_task.prior,
        description=CorrectionKind.DYNAMICS_CHANGE,
    )


def free_solution_reward(
    solution: SoftSolution, new_dynamics: TabularDynamics, base_task: Task
) -> RewardTable:
    """Reward under dynamics q whose optimal Q-function is the given Q*."""
    require_solved(solution, base_task)
    _check_dynamics(new_dynamics, base_task)
    shift = _dynamics_shift(solution, new_dynamics, base_task)
    return RewardTable(values=base_task.reward.values - shift[:, :, None])
