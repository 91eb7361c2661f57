"""Potential-based reward shaping.

Adding F(s,a,s') = gamma * phi(s') - phi(s) to a task's reward leaves its soft-optimal
policy unchanged and shifts Q* and V* by -phi(s). The shift also holds for the soft
value of any fixed policy, so sub-optimality gaps carry over between the two tasks.
"""
import json
import logging
from pathlib import Path
from typing import Any, Union

import numpy as np
from pydantic import BaseModel, field_validator

from erl.core.errors import ShapeMismatchError
from erl.core.mdp import PolicyTable, Task
from erl.core.solver import (
    DEFAULT_MAX_ITER,
    SoftSolution,
    soft_policy_evaluation,
    solve,
)

logger = logging.getLogger(__name__)


class Potential(BaseModel):
    phi: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("phi", mode="before")
    @classmethod
    def coerce_phi(cls, value: Any) -> np.ndarray:
        phi = np.array(value, dtype=float)
        if phi.ndim != 1 or phi.size < 1:
            raise ValueError(f"potential must be a non-empty state table, got shape {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise ValueError("potential has non-finite entries")
        phi.setflags(write=False)
        return phi

    @property
    def num_states(self) -> int:
        return int(self.phi.size)

    @classmethod
    def zeros(cls, num_states: int) -> "Potential":
        return cls(phi=np.zeros(num_states))


class ShapedTask(BaseModel):
    task: Task
    potential: Potential
    original: Task

    class Config:
        arbitrary_types_allowed = True
        frozen = True


def _as_potential(potential: Union[Potential, np.ndarray], num_states: int) -> Potential:
    if not isinstance(potential, Potential):
        potential = Potential(phi=potential)
    if potential.num_states != num_states:
        raise ShapeMismatchError(
            f"potential has {potential.num_states} entries, task has {num_states} states"
        )
    return potential


def shaping_term(potential: Potential, gamma: float) -> np.ndarray:
    phi = potential.phi
    return gamma * phi[None, None, :] - phi[:, None, None]


def shape(task: Task, potential: Union[Potential, np.ndarray]) -> ShapedTask:
    potential = _as_potential(potential, task.num_states)
    shaped = task.replace(reward=task.reward.values + shaping_term(potential, task.gamma))
    return ShapedTask(task=shaped, potential=potential, original=task)


def unshape_task(shaped: ShapedTask) -> Task:
    task = shaped.task
    return task.replace(reward=task.reward.values - shaping_term(shaped.potential, task.gamma))


def unshape_solution(
    shaped_solution: SoftSolution, potential: Union[Potential, np.ndarray]
) -> SoftSolution:
    potential = _as_potential(potential, shaped_solution.v.size)
    phi = potential.phi
    return SoftSolution(
        q=shaped_solution.q + phi[:, None],
        v=shaped_solution.v + phi,
        policy=shaped_solution.policy,
        trace=shaped_solution.trace,
    )


def potential_from_solution(solution: SoftSolution) -> Potential:
    return Potential(phi=solution.v)


class ShapingIdentityReport(BaseModel):
    q_residual: float
    v_residual: float
    gap_residual: float
    original_suboptimality: float
    shaped_suboptimality: float
    converged: bool

    def passed(self, tolerance: float = 1e-8) -> bool:
        return max(self.q_residual, self.v_residual, self.gap_residual) <= tolerance


def evaluate_shaped_policy_identity(
    task: Task,
    potential: Union[Potential, np.ndarray],
    policy: PolicyTable,
    tolerance: float = 1e-12,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ShapingIdentityReport:
    shaped = shape(task, potential)
    phi = shaped.potential.phi

    original_eval = soft_policy_evaluation(task, policy, tolerance, max_iter)
    shaped_eval = soft_policy_evaluation(shaped.task, policy, tolerance, max_iter)
    original_opt = solve(task, tolerance, max_iter)
    shaped_opt = solve(shaped.task, tolerance, max_iter)

    original_gap = original_eval.v - original_opt.v
    shaped_gap = shaped_eval.v - shaped_opt.v

    report = ShapingIdentityReport(
        q_residual=float(np.max(np.abs(shaped_eval.q - (original_eval.q - phi[:, None])))),
        v_residual=float(np.max(np.abs(shaped_eval.v - (original_eval.v - phi)))),
        gap_residual=float(np.max(np.abs(shaped_gap - original_gap))),
        original_suboptimality=float(np.max(np.abs(original_gap))),
        shaped_suboptimality=float(np.max(np.abs(shaped_gap))),
        converged=all(
            r.trace.converged for r in (original_eval, shaped_eval, original_opt, shaped_opt)
        ),
    )
    logger.debug(f"Shaped policy identity residuals: {report.model_dump()}")
    return report


def save_potential(potential: Potential, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(potential.phi.tolist()))


def load_potential(path: Union[str, Path]) -> Potential:
    return Potential(phi=json.loads(Path(path).read_text()))
