"""Soft value iteration and soft policy evaluation.

The backup is

    Q'(s,a) = sum_s' p(s'|s,a) [ r(s,a,s') + (gamma/beta) log sum_a' pi0(a'|s') exp(beta Q(s',a')) ]

and the log-partition is always evaluated with a max-shifted log-sum-exp, so large
beta does not overflow.
"""
import logging
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import logsumexp, rel_entr, softmax

from erl.core.errors import NumericFailureError, ShapeMismatchError
from erl.core.mdp import PolicyTable, Task, expected_rewards, require_valid_task

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITER = 100_000

QTable = np.ndarray
PriorLike = Union[PolicyTable, np.ndarray]


class ConvergenceTrace(BaseModel):
    errors: List[float] = Field(default_factory=list)
    converged: bool = False
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def iterations(self) -> int:
        return len(self.errors)

    def iterations_to(self, threshold: float) -> Optional[int]:
        """Number of sweeps until the successive difference first drops to ``threshold``."""
        for k, error in enumerate(self.errors, start=1):
            if error <= threshold:
                return k
        return None


class SoftSolution(BaseModel):
    q: np.ndarray
    v: np.ndarray
    policy: PolicyTable
    trace: ConvergenceTrace = Field(default_factory=ConvergenceTrace)

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class PolicyEvaluation(BaseModel):
    q: np.ndarray
    v: np.ndarray
    trace: ConvergenceTrace

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def converged(self) -> bool:
        return self.trace.converged


def _probs(prior: PriorLike) -> np.ndarray:
    return prior.probs if isinstance(prior, PolicyTable) else np.asarray(prior, dtype=float)


def _first_bad_cell(table: np.ndarray) -> tuple:
    return tuple(int(i) for i in np.argwhere(~np.isfinite(table))[0])


def _log_partition(q: np.ndarray, prior: np.ndarray, beta: float) -> np.ndarray:
    return logsumexp(beta * q, axis=1, b=prior) / beta


def extract_value(q: QTable, prior: PriorLike, beta: float) -> np.ndarray:
    """V(s) = (1/beta) log sum_a pi0(a|s) exp(beta q(s,a))."""
    q = np.asarray(q, dtype=float)
    v = _log_partition(q, _probs(prior), beta)
    if not np.all(np.isfinite(v)):
        raise NumericFailureError("log-partition is not finite", cell=_first_bad_cell(v))
    return v


def extract_policy(q: QTable, prior: PriorLike, beta: float) -> PolicyTable:
    """pi(a|s) proportional to pi0(a|s) exp(beta q(s,a))."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        logits = beta * q + np.log(_probs(prior))
    probs = softmax(logits, axis=1)
    if not np.all(np.isfinite(probs)):
        raise NumericFailureError("policy extraction is not finite", cell=_first_bad_cell(probs))
    return PolicyTable(probs=probs)


def _backup(q: np.ndarray, task: Task, mean_reward: np.ndarray) -> np.ndarray:
    v = _log_partition(q, task.prior.probs, task.beta)
    q_next = mean_reward + task.gamma * task.dynamics.expectation(v)
    if not np.all(np.isfinite(q_next)):
        raise NumericFailureError("soft backup overflowed", cell=_first_bad_cell(q_next))
    return q_next


def _check_q(q: QTable, task: Task, name: str = "q") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (task.num_states, task.num_actions):
        raise ShapeMismatchError(
            f"{name} shape {q.shape} != ({task.num_states}, {task.num_actions})"
        )
    if not np.all(np.isfinite(q)):
        raise NumericFailureError(f"{name} has non-finite entries", cell=_first_bad_cell(q))
    return q


def soft_backup(q: QTable, task: Task) -> QTable:
    q = _check_q(q, task)
    return _backup(q, task, expected_rewards(task))


def bellman_error(q_prev: QTable, q_next: QTable) -> float:
    q_prev = np.asarray(q_prev, dtype=float)
    q_next = np.asarray(q_next, dtype=float)
    if q_prev.shape != q_next.shape:
        raise ShapeMismatchError(
            f"cannot compare tables of shape {q_prev.shape} and {q_next.shape}"
        )
    return float(np.max(np.abs(q_next - q_prev)))


def bellman_residual(q: QTable, task: Task) -> float:
    return bellman_error(q, soft_backup(q, task))


def absorbing_states(task: Task) -> np.ndarray:
    """Mask of states where every action stays put with probability one and earns nothing.

    Their soft-optimal values are exactly zero under any prior.
    """
    n = task.num_states
    stays = task.dynamics.transition[np.arange(n), :, np.arange(n)] == 1.0
    earns_nothing = expected_rewards(task) == 0.0
    return np.all(stays & earns_nothing, axis=1)


def random_initialization(
    task: Task, rng: np.random.Generator, scale: Optional[float] = None
) -> QTable:
    """Uniform entries in [-scale, scale], default scale 1 / (1 - gamma).

    Absorbing zero-reward states start at their exact value 0.
    """
    bound = 1.0 / (1.0 - task.gamma) if scale is None else scale
    if bound < 0:
        raise ValueError(f"initialization scale must be non-negative, got {bound}")
    q0 = rng.uniform(-bound, bound, size=(task.num_states, task.num_actions))
    q0[absorbing_states(task)] = 0.0
    return q0


def solve(
    task: Task,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    q0: Optional[QTable] = None,
) -> SoftSolution:
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    require_valid_task(task)

    q = np.zeros((task.num_states, task.num_actions)) if q0 is None else _check_q(q0, task, "q0")
    mean_reward = expected_rewards(task)
    errors: List[float] = []
    converged = False

    for _ in range(max_iter):
        q_next = _backup(q, task, mean_reward)
        error = float(np.max(np.abs(q_next - q)))
        errors.append(error)
        q = q_next
        if error <= tolerance:
            converged = True
            break

    if converged:
        logger.debug(f"Soft value iteration converged after {len(errors)} sweeps")
    else:
        logger.warning(
            f"Soft value iteration stopped at max_iter={max_iter} "
            f"with error {errors[-1] if errors else float('nan'):.3e}"
        )

    return SoftSolution(
        q=q,
        v=extract_value(q, task.prior, task.beta),
        policy=extract_policy(q, task.prior, task.beta),
        trace=ConvergenceTrace(errors=errors, converged=converged, tolerance=tolerance),
    )


def soft_policy_evaluation(
    task: Task,
    policy: PolicyTable,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    q0: Optional[QTable] = None,
) -> PolicyEvaluation:
    """Fixed point of Q(s,a) = E_s'[ r + gamma E_{a'~pi}( Q(s',a') - (1/beta) log(pi/pi0) ) ]."""
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    require_valid_task(task)
    probs = policy.probs
    if probs.shape != task.prior.shape:
        raise ShapeMismatchError(f"policy shape {probs.shape} != prior shape {task.prior.shape}")

    divergence = rel_entr(probs, task.prior.probs).sum(axis=1)
    if not np.all(np.isfinite(divergence)):
        raise NumericFailureError(
            "policy is not absolutely continuous w.r.t. the prior", cell=_first_bad_cell(divergence)
        )
    penalty = divergence / task.beta

    q = np.zeros((task.num_states, task.num_actions)) if q0 is None else _check_q(q0, task, "q0")
    mean_reward = expected_rewards(task)
    errors: List[float] = []
    converged = False

    for _ in range(max_iter):
        v = np.sum(probs * q, axis=1) - penalty
        q_next = mean_reward + task.gamma * task.dynamics.expectation(v)
        if not np.all(np.isfinite(q_next)):
            raise NumericFailureError("policy evaluation overflowed", cell=_first_bad_cell(q_next))
        error = float(np.max(np.abs(q_next - q)))
        errors.append(error)
        q = q_next
        if error <= tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"Soft policy evaluation stopped at max_iter={max_iter}")

    return PolicyEvaluation(
        q=q,
        v=np.sum(probs * q, axis=1) - penalty,
        trace=ConvergenceTrace(errors=errors, converged=converged, tolerance=tolerance),
    )
