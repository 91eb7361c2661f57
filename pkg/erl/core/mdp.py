"""Tabular entropy-regularized task model.

A task is the tuple <S, A, p, r, gamma, beta, pi0>. Tables are dense numpy arrays
indexed (s, a, s') for dynamics and rewards and (s, a) for policies. Arrays are
copied on construction and marked read-only, so a Task can be shared freely
between workers.
"""
from typing import Any, List, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from erl.core.errors import InvalidTaskError, ShapeMismatchError

ROW_TOLERANCE = 1e-12


def _frozen(table: np.ndarray) -> np.ndarray:
    table.setflags(write=False)
    return table


def _renormalize_rows(table: np.ndarray) -> np.ndarray:
    # Only rows off by more than summation round-off get rescaled, so a table that
    # was already renormalized is left bit-identical.
    sums = table.sum(axis=-1, keepdims=True)
    deviation = np.abs(sums - 1.0)
    slack = 4.0 * np.finfo(float).eps * table.shape[-1]
    fix = (deviation > slack) & (deviation <= ROW_TOLERANCE)
    if np.any(fix):
        table = np.where(fix, table / np.where(sums == 0.0, 1.0, sums), table)
    return table


class TabularDynamics(BaseModel):
    transition: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("transition", mode="before")
    @classmethod
    def coerce_table(cls, value: Any) -> np.ndarray:
        table = np.array(value, dtype=float)
        if table.ndim != 3:
            raise ValueError(f"transition must be indexed (s, a, s'), got rank {table.ndim}")
        if table.shape[0] < 1 or table.shape[1] < 1 or table.shape[0] != table.shape[2]:
            raise ValueError(f"transition shape {table.shape} is not (S, A, S)")
        return _frozen(_renormalize_rows(table))

    @property
    def num_states(self) -> int:
        return int(self.transition.shape[0])

    @property
    def num_actions(self) -> int:
        return int(self.transition.shape[1])

    def expectation(self, values: np.ndarray) -> np.ndarray:
        """E_{s' ~ p(.|s,a)}[values(s')] as an (s, a) table."""
        return self.transition @ np.asarray(values, dtype=float)


class RewardTable(BaseModel):
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("values", mode="before")
    @classmethod
    def coerce_table(cls, value: Any) -> np.ndarray:
        table = np.array(value, dtype=float)
        if table.ndim == 2:
            # (s, a) rewards are broadcast over the successor state
            table = np.repeat(table[:, :, None], table.shape[0], axis=2)
        if table.ndim != 3:
            raise ValueError(f"reward must be indexed (s, a, s') or (s, a), got rank {table.ndim}")
        return _frozen(table)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)


class PolicyTable(BaseModel):
    probs: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("probs", mode="before")
    @classmethod
    def coerce_table(cls, value: Any) -> np.ndarray:
        table = np.array(value, dtype=float)
        if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
            raise ValueError(f"policy must be indexed (s, a), got shape {table.shape}")
        return _frozen(_renormalize_rows(table))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.probs.shape)

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0.0))


def _as_dynamics(value: Any) -> Any:
    if isinstance(value, (np.ndarray, list)):
        return TabularDynamics(transition=value)
    return value


def _as_reward(value: Any) -> Any:
    if isinstance(value, (np.ndarray, list)):
        return RewardTable(values=value)
    return value


def _as_policy(value: Any) -> Any:
    if isinstance(value, (np.ndarray, list)):
        return PolicyTable(probs=value)
    return value


class TaskEnvironment(BaseModel):
    """Everything of a task except its reward: <S, A, p, gamma, beta, pi0>."""

    dynamics: TabularDynamics
    gamma: float
    beta: float
    prior: PolicyTable

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("dynamics", mode="before")
    @classmethod
    def wrap_dynamics(cls, value: Any) -> Any:
        return _as_dynamics(value)

    @field_validator("prior", mode="before")
    @classmethod
    def wrap_prior(cls, value: Any) -> Any:
        return _as_policy(value)

    @property
    def num_states(self) -> int:
        return self.dynamics.num_states

    @property
    def num_actions(self) -> int:
        return self.dynamics.num_actions

    def with_reward(self, reward: Any) -> "Task":
        return Task(
            dynamics=self.dynamics,
            reward=reward,
            gamma=self.gamma,
            beta=self.beta,
            prior=self.prior,
        )


class Task(BaseModel):
    dynamics: TabularDynamics
    reward: RewardTable
    gamma: float
    beta: float
    prior: PolicyTable

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("dynamics", mode="before")
    @classmethod
    def wrap_dynamics(cls, value: Any) -> Any:
        return _as_dynamics(value)

    @field_validator("reward", mode="before")
    @classmethod
    def wrap_reward(cls, value: Any) -> Any:
        return _as_reward(value)

    @field_validator("prior", mode="before")
    @classmethod
    def wrap_prior(cls, value: Any) -> Any:
        return _as_policy(value)

    @model_validator(mode="after")
    def check_shapes(self) -> "Task":
        expected = self.dynamics.transition.shape
        if self.reward.shape != expected:
            raise ShapeMismatchError(
                f"reward shape {self.reward.shape} != dynamics shape {expected}"
            )
        if self.prior.shape != expected[:2]:
            raise ShapeMismatchError(f"prior shape {self.prior.shape} != (S, A) {expected[:2]}")
        return self

    @property
    def num_states(self) -> int:
        return self.dynamics.num_states

    @property
    def num_actions(self) -> int:
        return self.dynamics.num_actions

    @property
    def environment(self) -> TaskEnvironment:
        return TaskEnvironment(
            dynamics=self.dynamics, gamma=self.gamma, beta=self.beta, prior=self.prior
        )

    def replace(self, **changes: Any) -> "Task":
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes)
        return Task(**fields)

    def __repr__(self) -> str:
        return (
            f"Task(states={self.num_states}, actions={self.num_actions}, "
            f"gamma={self.gamma}, beta={self.beta})"
        )


class Violation(BaseModel):
    invariant: str
    index: Tuple[int, ...] = ()
    magnitude: float = 0.0

    def describe(self) -> str:
        where = f" at {self.index}" if self.index else ""
        return f"{self.invariant}{where} (magnitude {self.magnitude:.3e})"


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.is_valid:
            return "ok"
        head = "; ".join(v.describe() for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        return f"{len(self.violations)} violation(s): {head}{more}"


def _cells(mask: np.ndarray) -> List[Tuple[int, ...]]:
    return [tuple(int(i) for i in idx) for idx in np.argwhere(mask)]


def validate_task(task: Task) -> ValidationReport:
    violations: List[Violation] = []
    transition = task.dynamics.transition

    for idx in _cells(transition < 0.0):
        violations.append(
            Violation(invariant="transition_nonnegative", index=idx, magnitude=-transition[idx])
        )

    deficits = 1.0 - transition.sum(axis=2)
    for idx in _cells(np.abs(deficits) > ROW_TOLERANCE):
        violations.append(
            Violation(invariant="transition_row_stochastic", index=idx, magnitude=deficits[idx])
        )

    rewards = task.reward.values
    for idx in _cells(~np.isfinite(rewards)):
        violations.append(Violation(invariant="reward_finite", index=idx, magnitude=rewards[idx]))

    prior = task.prior.probs
    prior_deficits = 1.0 - prior.sum(axis=1)
    for idx in _cells(np.abs(prior_deficits) > ROW_TOLERANCE):
        violations.append(
            Violation(invariant="prior_row_stochastic", index=idx, magnitude=prior_deficits[idx])
        )
    for idx in _cells(~(prior > 0.0)):
        violations.append(Violation(invariant="prior_positive", index=idx, magnitude=prior[idx]))

    if not 0.0 < task.gamma < 1.0:
        violations.append(Violation(invariant="gamma_range", magnitude=task.gamma))
    if not (np.isfinite(task.beta) and task.beta > 0.0):
        violations.append(Violation(invariant="beta_positive", magnitude=task.beta))

    return ValidationReport(violations=violations)


def require_valid_task(task: Task) -> None:
    report = validate_task(task)
    if not report.is_valid:
        raise InvalidTaskError(report)


def uniform_prior(num_states: int, num_actions: int) -> PolicyTable:
    if num_states < 1 or num_actions < 1:
        raise ValueError(f"uniform_prior needs positive counts, got ({num_states}, {num_actions})")
    return PolicyTable(probs=np.full((num_states, num_actions), 1.0 / num_actions))


def expected_reward(task: Task, s: int, a: int) -> float:
    if not (0 <= s < task.num_states and 0 <= a < task.num_actions):
        raise IndexError(
            f"(s={s}, a={a}) out of range for {task.num_states} states, {task.num_actions} actions"
        )
    return float(task.dynamics.transition[s, a] @ task.reward.values[s, a])


def expected_rewards(task: Task) -> np.ndarray:
    return np.einsum("san,san->sa", task.dynamics.transition, task.reward.values)
