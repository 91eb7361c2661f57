"""Learning a corrective value function from previously collected transitions.

Records are (s, a, reward, s') tuples gathered under the base task's dynamics.
Rewards are relabelled to the corrective reward kappa, and the target uses the
pre-substitution form of the backup,

    K(s,a) <- kappa + gamma [ (1/beta) log sum_a' pi0(a'|s') exp(beta (Q* + K)(s',a')) - V*(s') ],

which equals the corrective backup under the prior pi* without ever forming pi*.
"""
import logging
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import logsumexp

from erl.core.errors import CoverageError, ShapeMismatchError
from erl.core.mdp import Task
from erl.core.solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
    ConvergenceTrace,
    QTable,
    SoftSolution,
    extract_policy,
    extract_value,
)
from erl.transfer.corrective import CorrectiveProblem

logger = logging.getLogger(__name__)

# passes over the batch for stochastic fits when max_iter is not given
DEFAULT_STOCHASTIC_PASSES = 3


class OfflineMode(str, Enum):
    EXACT_REPLAY = "exact-replay"
    STOCHASTIC = "stochastic"


class LearningRateSchedule(BaseModel):
    """alpha_k = alpha0 / (1 + k / tau); sums diverge and squares converge."""

    alpha0: float = Field(default=0.5, gt=0.0, le=1.0)
    tau: float = Field(default=1000.0, gt=0.0)

    def rate(self, step: int) -> float:
        return self.alpha0 / (1.0 + step / self.tau)


class TransitionBatch(BaseModel):
    num_states: int
    num_actions: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    weights: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @model_validator(mode="after")
    def check_records(self) -> "TransitionBatch":
        n = self.states.shape[0]
        for name in ("actions", "rewards", "next_states"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have one entry per record ({n})")
        if self.weights is not None and (self.weights.shape != (n,) or np.any(self.weights < 0)):
            raise ValueError("weights must be one nonnegative entry per record")
        if n and (
            self.states.min() < 0
            or self.states.max() >= self.num_states
            or self.next_states.min() < 0
            or self.next_states.max() >= self.num_states
            or self.actions.min() < 0
            or self.actions.max() >= self.num_actions
        ):
            raise ValueError("batch indices out of range")
        return self

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def record_weights(self) -> np.ndarray:
        return np.ones(len(self)) if self.weights is None else self.weights

    def counts(self) -> np.ndarray:
        """Weighted visit totals per (s, a, s')."""
        table = np.zeros((self.num_states, self.num_actions, self.num_states))
        np.add.at(table, (self.states, self.actions, self.next_states), self.record_weights)
        return table

    def visited(self) -> np.ndarray:
        return self.counts().sum(axis=2) > 0

    def relabel(self, corrective: CorrectiveProblem) -> "TransitionBatch":
        kappa = corrective.task.reward.values
        return self.model_copy(
            update={"rewards": kappa[self.states, self.actions, self.next_states]}
        )


def exhaustive_batch(task: Task) -> TransitionBatch:
    """One record per (s, a, s') in the support of p, weighted by its probability.

    Empirical frequencies of this batch equal p exactly, so exact replay over it
    reproduces the model-based backup.
    """
    transition = task.dynamics.transition
    states, actions, next_states = np.nonzero(transition > 0)
    return TransitionBatch(
        num_states=task.num_states,
        num_actions=task.num_actions,
        states=states,
        actions=actions,
        rewards=task.reward.values[states, actions, next_states],
        next_states=next_states,
        weights=transition[states, actions, next_states],
    )


def sample_batch(task: Task, num_samples: int, rng: np.random.Generator) -> TransitionBatch:
    """(s, a) uniform over the table, s' drawn from p(.|s, a)."""
    if num_samples < 1:
        raise ValueError(f"num_samples must be positive, got {num_samples}")
    states = rng.integers(task.num_states, size=num_samples)
    actions = rng.integers(task.num_actions, size=num_samples)
    cumulative = np.cumsum(task.dynamics.transition[states, actions], axis=1)
    draws = rng.random(num_samples)[:, None] * cumulative[:, -1:]
    next_states = np.minimum((cumulative < draws).sum(axis=1), task.num_states - 1)
    return TransitionBatch(
        num_states=task.num_states,
        num_actions=task.num_actions,
        states=states,
        actions=actions,
        rewards=task.reward.values[states, actions, next_states],
        next_states=next_states,
    )


def _check_batch(k: np.ndarray, batch: TransitionBatch, corrective: CorrectiveProblem) -> None:
    task = corrective.task
    if (batch.num_states, batch.num_actions) != (task.num_states, task.num_actions):
        raise ShapeMismatchError(
            f"batch is over ({batch.num_states}, {batch.num_actions}), corrective task over "
            f"({task.num_states}, {task.num_actions})"
        )
    if k.shape != (task.num_states, task.num_actions):
        raise ShapeMismatchError(f"K shape {k.shape} != ({task.num_states}, {task.num_actions})")


def _next_values(k: np.ndarray, corrective: CorrectiveProblem, base_v: np.ndarray) -> np.ndarray:
    beta = corrective.task.beta
    total = corrective.base_q + k
    return logsumexp(beta * total, axis=1, b=corrective.original_prior.probs) / beta - base_v


def _require_coverage(batch: TransitionBatch) -> None:
    missing = [tuple(int(i) for i in cell) for cell in np.argwhere(~batch.visited())]
    if missing:
        raise CoverageError(missing)


def offline_k_update(
    k: QTable,
    batch: TransitionBatch,
    corrective: CorrectiveProblem,
    mode: OfflineMode = OfflineMode.EXACT_REPLAY,
    schedule: Optional[LearningRateSchedule] = None,
    relabel: bool = True,
    step_offset: int = 0,
) -> QTable:
    """One pass over the batch.

    Exact replay averages every record's target per (s, a) with the batch's
    empirical frequencies. Stochastic mode applies soft Q-learning updates one
    record at a time, in batch order, with the rate taken at ``step_offset + i``.
    """
    k = np.array(k, dtype=float)
    _check_batch(k, batch, corrective)
    if relabel:
        batch = batch.relabel(corrective)
    gamma = corrective.task.gamma
    base_v = corrective.base_v

    if OfflineMode(mode) == OfflineMode.EXACT_REPLAY:
        _require_coverage(batch)
        targets = batch.rewards + gamma * _next_values(k, corrective, base_v)[batch.next_states]
        weights = batch.record_weights
        totals = np.zeros_like(k)
        norms = np.zeros_like(k)
        np.add.at(totals, (batch.states, batch.actions), weights * targets)
        np.add.at(norms, (batch.states, batch.actions), weights)
        return totals / norms

    schedule = schedule or LearningRateSchedule()
    beta = corrective.task.beta
    prior = corrective.original_prior.probs
    base_q = corrective.base_q
    for i, (s, a, reward, s_next) in enumerate(
        zip(batch.states, batch.actions, batch.rewards, batch.next_states)
    ):
        next_value = (
            logsumexp(beta * (base_q[s_next] + k[s_next]), b=prior[s_next]) / beta - base_v[s_next]
        )
        alpha = schedule.rate(step_offset + i)
        k[s, a] += alpha * (reward + gamma * next_value - k[s, a])
    return k


def fit_offline(
    batch: TransitionBatch,
    corrective: CorrectiveProblem,
    mode: OfflineMode = OfflineMode.EXACT_REPLAY,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: Optional[int] = None,
    schedule: Optional[LearningRateSchedule] = None,
    k0: Optional[QTable] = None,
) -> SoftSolution:
    """Repeat ``offline_k_update`` until successive passes agree within ``tolerance``.

    The returned solution is K with its value and policy under the corrective prior.
    ``max_iter`` counts passes over the batch and defaults to DEFAULT_MAX_ITER for
    exact replay and DEFAULT_STOCHASTIC_PASSES for stochastic updates, whose schedule
    keeps decaying across passes.
    """
    mode = OfflineMode(mode)
    if max_iter is None:
        exact = mode == OfflineMode.EXACT_REPLAY
        max_iter = DEFAULT_MAX_ITER if exact else DEFAULT_STOCHASTIC_PASSES
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter}")
    task = corrective.task
    k = np.zeros((task.num_states, task.num_actions)) if k0 is None else np.array(k0, dtype=float)
    relabelled = batch.relabel(corrective)
    errors = []
    converged = False

    for sweep in range(max_iter):
        k_next = offline_k_update(
            k,
            relabelled,
            corrective,
            mode=mode,
            schedule=schedule,
            relabel=False,
            step_offset=sweep * len(batch),
        )
        error = float(np.max(np.abs(k_next - k)))
        errors.append(error)
        k = k_next
        if error <= tolerance:
            converged = True
            break

    if not converged and mode == OfflineMode.EXACT_REPLAY:
        logger.warning(f"Offline replay stopped at max_iter={max_iter} with error {errors[-1]:.3e}")
    logger.debug(
        f"Offline {mode.value} fit: {len(errors)} passes over {len(batch)} records"
    )

    return SoftSolution(
        q=k,
        v=extract_value(k, task.prior, task.beta),
        policy=extract_policy(k, task.prior, task.beta),
        trace=ConvergenceTrace(errors=errors, converged=converged, tolerance=tolerance),
    )
