"""Composition of reward-varying tasks.

For tasks sharing <S, A, p, gamma, beta, pi0> and a pointwise composition f of their
rewards, the composed task's optimal Q-function is f({Q*_m}) + K*, where K* solves the
task with prior pi_f ~ pi0 exp(beta f({Q*_m})) and reward

    kappa(s,a,s') = f({r_m(s,a,s')}) + gamma V_f(s') - f({Q*_m})(s,a).
"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.interpolate import RegularGridInterpolator

from erl.core.errors import CompositionRangeError, IncompatibleTasksError
from erl.core.io import load_task
from erl.core.mdp import PolicyTable, RewardTable, Task
from erl.core.solver import ConvergenceTrace, SoftSolution, extract_policy, extract_value
from erl.transfer.corrective import (
    CorrectionKind,
    CorrectiveProblem,
    corrective_prior,
    require_solved,
)

logger = logging.getLogger(__name__)


class CompositionKind(str, Enum):
    MIN = "min"
    MAX = "max"
    WSUM = "wsum"
    PRODUCT = "product"
    CUSTOM = "custom"


class CustomTable(BaseModel):
    """f tabulated on a rectilinear grid, one axis per member task, linearly interpolated."""

    axes: List[List[float]]
    values: Any

    @model_validator(mode="after")
    def check_grid(self) -> "CustomTable":
        values = np.asarray(self.values, dtype=float)
        expected = tuple(len(axis) for axis in self.axes)
        if values.shape != expected:
            raise ValueError(f"custom table values shape {values.shape} != axes lengths {expected}")
        if not np.all(np.isfinite(values)):
            raise ValueError("custom table values must be finite")
        return self

    def evaluate(self, stack: np.ndarray) -> np.ndarray:
        if stack.shape[0] != len(self.axes):
            raise CompositionRangeError(
                f"custom table has {len(self.axes)} axes but {stack.shape[0]} members were given"
            )
        interpolator = RegularGridInterpolator(
            [np.asarray(axis, dtype=float) for axis in self.axes],
            np.asarray(self.values, dtype=float),
            bounds_error=True,
        )
        points = np.moveaxis(stack, 0, -1).reshape(-1, stack.shape[0])
        try:
            result = interpolator(points)
        except ValueError as e:
            raise CompositionRangeError(
                f"custom f is not tabulated on the observed range: {e}"
            ) from e
        return result.reshape(stack.shape[1:])


class CompositionFunction(BaseModel):
    kind: CompositionKind
    weights: Optional[List[float]] = None
    table: Optional[CustomTable] = None

    class Config:
        use_enum_values = True

    @model_validator(mode="after")
    def check_parameters(self) -> "CompositionFunction":
        if self.kind == CompositionKind.WSUM and not self.weights:
            raise ValueError("wsum composition needs weights")
        if self.kind == CompositionKind.CUSTOM and self.table is None:
            raise ValueError("custom composition needs a table")
        return self

    @property
    def is_linear(self) -> bool:
        return self.kind == CompositionKind.WSUM

    def __call__(self, stack: np.ndarray) -> np.ndarray:
        stack = np.asarray(stack, dtype=float)
        if self.kind == CompositionKind.MIN:
            result = stack.min(axis=0)
        elif self.kind == CompositionKind.MAX:
            result = stack.max(axis=0)
        elif self.kind == CompositionKind.PRODUCT:
            result = np.prod(stack, axis=0)
        elif self.kind == CompositionKind.WSUM:
            weights = np.asarray(self.weights, dtype=float)
            if weights.size != stack.shape[0]:
                raise CompositionRangeError(
                    f"{weights.size} weights given for {stack.shape[0]} member tasks"
                )
            result = np.tensordot(weights, stack, axes=1)
        else:
            assert self.table is not None
            result = self.table.evaluate(stack)
        if not np.all(np.isfinite(result)):
            raise CompositionRangeError(
                f"{self.kind} composition is unbounded on the observed range"
            )
        return result


class CompositionSpec(BaseModel):
    member_tasks: List[Task]
    f: CompositionFunction

    class Config:
        arbitrary_types_allowed = True

    @property
    def num_members(self) -> int:
        return len(self.member_tasks)


class CompositionPrior(BaseModel):
    v_f: np.ndarray
    pi_f: PolicyTable
    f_of_q: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True


def require_reward_varying(tasks: Sequence[Task]) -> None:
    if not tasks:
        raise IncompatibleTasksError("composition needs at least one member task")
    first = tasks[0]
    for index, task in enumerate(tasks[1:], start=1):
        mismatches = []
        if not np.array_equal(task.dynamics.transition, first.dynamics.transition):
            mismatches.append("dynamics")
        if task.gamma != first.gamma:
            mismatches.append("gamma")
        if task.beta != first.beta:
            mismatches.append("beta")
        if not np.array_equal(task.prior.probs, first.prior.probs):
            mismatches.append("prior")
        if mismatches:
            raise IncompatibleTasksError(
                f"member task {index} differs from task 0 in {', '.join(mismatches)}"
            )


def _checked_members(spec: CompositionSpec, member_solutions: Sequence[SoftSolution]) -> Task:
    require_reward_varying(spec.member_tasks)
    if len(member_solutions) != spec.num_members:
        raise ValueError(
            f"{len(member_solutions)} solutions given for {spec.num_members} member tasks"
        )
    for task, solution in zip(spec.member_tasks, member_solutions):
        require_solved(solution, task)
    return spec.member_tasks[0]


def composed_task(spec: CompositionSpec) -> Task:
    """The composed task itself, with reward f({r_m})."""
    require_reward_varying(spec.member_tasks)
    rewards = np.stack([task.reward.values for task in spec.member_tasks])
    return spec.member_tasks[0].replace(reward=spec.f(rewards))


def composition_prior(
    spec: CompositionSpec, member_solutions: Sequence[SoftSolution]
) -> CompositionPrior:
    base = _checked_members(spec, member_solutions)
    f_of_q = spec.f(np.stack([solution.q for solution in member_solutions]))
    return CompositionPrior(
        v_f=extract_value(f_of_q, base.prior, base.beta),
        pi_f=extract_policy(f_of_q, base.prior, base.beta),
        f_of_q=f_of_q,
    )


def compose(
    spec: CompositionSpec, member_solutions: Sequence[SoftSolution]
) -> Tuple[CompositionPrior, CorrectiveProblem]:
    base = _checked_members(spec, member_solutions)
    prior = composition_prior(spec, member_solutions)
    rewards = np.stack([task.reward.values for task in spec.member_tasks])
    kappa = (
        spec.f(rewards)
        + base.gamma * prior.v_f[None, None, :]
        - prior.f_of_q[:, :, None]
    )
    corrective = CorrectiveProblem(
        task=base.replace(reward=kappa, prior=corrective_prior(prior.pi_f, base.prior)),
        base_q=prior.f_of_q,
        original_prior=base.prior,
        description=CorrectionKind.COMPOSITION,
    )
    logger.debug(f"Built {spec.f.kind} composition over {spec.num_members} tasks")
    return prior, corrective


def zero_shot(spec: CompositionSpec, member_solutions: Sequence[SoftSolution]) -> SoftSolution:
    """f({Q*_m}) with its induced value and policy, before any correction."""
    prior = composition_prior(spec, member_solutions)
    return SoftSolution(
        q=prior.f_of_q,
        v=prior.v_f,
        policy=prior.pi_f,
        trace=ConvergenceTrace(converged=False),
    )


def divergence_correction_reward(
    spec: CompositionSpec, member_solutions: Sequence[SoftSolution]
) -> RewardTable:
    """For a weighted sum, kappa reduces to gamma (V_f(s') - sum_m w_m V*_m(s'))."""
    if not spec.f.is_linear:
        raise ValueError("divergence correction is only defined for weighted-sum compositions")
    base = _checked_members(spec, member_solutions)
    prior = composition_prior(spec, member_solutions)
    weights = np.asarray(spec.f.weights, dtype=float)
    mixed_value = np.tensordot(weights, np.stack([s.v for s in member_solutions]), axes=1)
    gap = base.gamma * (prior.v_f - mixed_value)
    values = np.broadcast_to(gap[None, None, :], base.dynamics.transition.shape)
    return RewardTable(values=values)


def composition_spec_from_dict(
    data: Dict[str, Any], base_dir: Union[str, Path, None] = None
) -> CompositionSpec:
    """Text form: ``{"members": [task files], "f": {"kind", "weights", "table"}}``.

    Member paths are relative to ``base_dir``.
    """
    root = Path(base_dir) if base_dir is not None else Path(".")
    members = [load_task(root / member) for member in data["members"]]
    return CompositionSpec(member_tasks=members, f=CompositionFunction(**data["f"]))


def load_composition_spec(path: Union[str, Path]) -> CompositionSpec:
    path = Path(path)
    return composition_spec_from_dict(json.loads(path.read_text()), base_dir=path.parent)
