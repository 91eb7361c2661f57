import json

import numpy as np
import pytest
from pydantic import ValidationError

from erl.core.errors import CompositionRangeError, IncompatibleTasksError, NumericFailureError
from erl.core.io import save_task
from erl.core.mdp import Task, uniform_prior
from erl.core.solver import SoftSolution, solve
from erl.envs.random_tasks import random_dynamics, random_reward, random_task
from erl.transfer.composition import (
    CompositionFunction,
    CompositionKind,
    CompositionSpec,
    CustomTable,
    compose,
    composed_task,
    divergence_correction_reward,
    load_composition_spec,
    require_reward_varying,
    zero_shot,
)
from erl.transfer.corrective import combine

TOL = 1e-11


def member_tasks(rng: np.random.Generator, count: int, num_states: int, num_actions: int) -> list:
    base = random_task(
        rng, num_states, num_actions, gamma=0.9, beta=2.0, reward_low=-0.3, reward_high=0.3
    )
    members = [base]
    for _ in range(count - 1):
        reward = random_reward(rng, num_states, num_actions, low=-0.3, high=0.3)
        members.append(base.replace(reward=reward))
    return members


def solve_all(tasks: list) -> list:
    return [solve(task, tolerance=TOL) for task in tasks]


def convex_weights(rng: np.random.Generator, count: int) -> list:
    weights = rng.uniform(0.1, 1.0, size=count)
    return list(weights / weights.sum())


def function_for(
    kind: CompositionKind, rng: np.random.Generator, count: int
) -> CompositionFunction:
    if kind == CompositionKind.WSUM:
        return CompositionFunction(kind=kind, weights=convex_weights(rng, count))
    return CompositionFunction(kind=kind)


class TestCompositionFunction:
    def test_pointwise_kinds(self) -> None:
        stack = np.array([[1.0, -2.0], [3.0, 0.5]])
        assert list(CompositionFunction(kind="min")(stack)) == [1.0, -2.0]
        assert list(CompositionFunction(kind="max")(stack)) == [3.0, 0.5]
        assert list(CompositionFunction(kind="product")(stack)) == [3.0, -1.0]
        wsum = CompositionFunction(kind="wsum", weights=[0.25, 0.75])
        np.testing.assert_allclose(wsum(stack), [2.5, -0.125])

    def test_wsum_needs_weights(self) -> None:
        with pytest.raises(ValidationError):
            CompositionFunction(kind="wsum")

    def test_weight_count_checked(self) -> None:
        with pytest.raises(CompositionRangeError):
            CompositionFunction(kind="wsum", weights=[1.0])(np.zeros((2, 3)))

    def test_custom_table_interpolates(self) -> None:
        table = CustomTable(axes=[[-20.0, 20.0], [-20.0, 20.0]], values=[[-40.0, 0.0], [0.0, 40.0]])
        f = CompositionFunction(kind="custom", table=table)
        np.testing.assert_allclose(f(np.array([[1.5, -3.0], [2.0, 0.25]])), [3.5, -2.75])

    def test_custom_table_out_of_range(self) -> None:
        table = CustomTable(axes=[[0.0, 1.0], [0.0, 1.0]], values=[[0.0, 1.0], [1.0, 2.0]])
        f = CompositionFunction(kind="custom", table=table)
        with pytest.raises(CompositionRangeError):
            f(np.array([[-0.5], [0.5]]))

    def test_custom_table_shape_checked(self) -> None:
        with pytest.raises(ValidationError):
            CustomTable(axes=[[0.0, 1.0], [0.0, 1.0, 2.0]], values=[[0.0, 1.0], [1.0, 2.0]])


class TestCompositionIdentity:
    @pytest.mark.slow
    @pytest.mark.parametrize(
        "kind",
        [CompositionKind.MIN, CompositionKind.MAX, CompositionKind.WSUM, CompositionKind.PRODUCT],
    )
    @pytest.mark.parametrize("count", [2, 3])
    def test_identity_on_random_members(self, kind: CompositionKind, count: int) -> None:
        rng = np.random.default_rng(500 + 10 * count + len(kind.value))
        for _ in range(25):
            tasks = member_tasks(rng, count, int(rng.integers(2, 9)), int(rng.integers(2, 4)))
            spec = CompositionSpec(member_tasks=tasks, f=function_for(kind, rng, count))
            _, corrective = compose(spec, solve_all(tasks))
            combined = combine(corrective, solve(corrective.task, tolerance=TOL))
            direct = solve(composed_task(spec), tolerance=TOL)

            assert np.max(np.abs(direct.q - combined.q)) <= 1e-8
            assert np.max(np.abs(direct.policy.probs - combined.policy.probs)) <= 1e-8

    def test_single_member_needs_no_correction(self) -> None:
        tasks = member_tasks(np.random.default_rng(20), 1, 5, 3)
        f = CompositionFunction(kind="wsum", weights=[1.0])
        spec = CompositionSpec(member_tasks=tasks, f=f)
        _, corrective = compose(spec, solve_all(tasks))
        k_star = solve(corrective.task, tolerance=TOL)
        assert np.max(np.abs(k_star.q)) <= 1e-8

    def test_custom_sum_matches_unit_weights(self) -> None:
        tasks = member_tasks(np.random.default_rng(21), 2, 4, 2)
        solutions = solve_all(tasks)
        table = CustomTable(axes=[[-20.0, 20.0], [-20.0, 20.0]], values=[[-40.0, 0.0], [0.0, 40.0]])
        custom = CompositionSpec(
            member_tasks=tasks, f=CompositionFunction(kind="custom", table=table)
        )
        summed = CompositionSpec(
            member_tasks=tasks, f=CompositionFunction(kind="wsum", weights=[1.0, 1.0])
        )
        custom_fit = combine(*self._corrected(custom, solutions))
        summed_fit = combine(*self._corrected(summed, solutions))
        np.testing.assert_allclose(custom_fit.q, summed_fit.q, atol=1e-8)

    @staticmethod
    def _corrected(spec: CompositionSpec, solutions: list) -> tuple:
        _, corrective = compose(spec, solutions)
        return corrective, solve(corrective.task, tolerance=TOL)


class TestConvexWeightedSum:
    def test_correction_is_nonpositive(self) -> None:
        rng = np.random.default_rng(30)
        for _ in range(20):
            tasks = member_tasks(rng, 3, 6, 3)
            solutions = solve_all(tasks)
            f = CompositionFunction(kind="wsum", weights=convex_weights(rng, 3))
            spec = CompositionSpec(member_tasks=tasks, f=f)
            prior, corrective = compose(spec, solutions)
            k_star = solve(corrective.task, tolerance=TOL)
            assert np.all(k_star.q <= 1e-10)

            weights = np.asarray(spec.f.weights)
            mixed = np.tensordot(weights, np.stack([s.v for s in solutions]), axes=1)
            assert np.all(prior.v_f <= mixed + 1e-12)

    def test_divergence_reward_gives_same_correction(self) -> None:
        rng = np.random.default_rng(31)
        tasks = member_tasks(rng, 2, 6, 3)
        solutions = solve_all(tasks)
        spec = CompositionSpec(
            member_tasks=tasks, f=CompositionFunction(kind="wsum", weights=[0.3, 0.7])
        )
        prior, corrective = compose(spec, solutions)
        k_star = solve(corrective.task, tolerance=TOL)
        reward = divergence_correction_reward(spec, solutions)
        divergence_task = tasks[0].replace(reward=reward, prior=prior.pi_f)
        k_divergence = solve(divergence_task, tolerance=TOL)
        assert np.max(np.abs(k_divergence.q - k_star.q)) <= 1e-8

    def test_divergence_reward_needs_linear_f(self) -> None:
        tasks = member_tasks(np.random.default_rng(32), 2, 3, 2)
        spec = CompositionSpec(member_tasks=tasks, f=CompositionFunction(kind="min"))
        with pytest.raises(ValueError):
            divergence_correction_reward(spec, solve_all(tasks))


class TestZeroShot:
    def test_zero_shot_is_composed_q(self) -> None:
        tasks = member_tasks(np.random.default_rng(40), 2, 4, 2)
        solutions = solve_all(tasks)
        spec = CompositionSpec(member_tasks=tasks, f=CompositionFunction(kind="max"))
        estimate: SoftSolution = zero_shot(spec, solutions)
        np.testing.assert_array_equal(estimate.q, np.maximum(solutions[0].q, solutions[1].q))
        assert not estimate.trace.converged
        np.testing.assert_allclose(estimate.policy.probs.sum(axis=1), 1.0)


class TestCompatibility:
    def test_different_dynamics_rejected(self) -> None:
        rng = np.random.default_rng(50)
        first = random_task(rng, 4, 2)
        second = first.replace(dynamics=random_dynamics(rng, 4, 2))
        with pytest.raises(IncompatibleTasksError) as exc_info:
            require_reward_varying([first, second])
        assert "dynamics" in str(exc_info.value)

    def test_different_gamma_rejected(self) -> None:
        first = random_task(np.random.default_rng(51), 4, 2)
        with pytest.raises(IncompatibleTasksError):
            require_reward_varying([first, first.replace(gamma=0.5)])

    def test_empty_rejected(self) -> None:
        with pytest.raises(IncompatibleTasksError):
            require_reward_varying([])

    def test_solution_count_checked(self) -> None:
        tasks = member_tasks(np.random.default_rng(52), 2, 3, 2)
        spec = CompositionSpec(member_tasks=tasks, f=CompositionFunction(kind="min"))
        with pytest.raises(ValueError):
            compose(spec, solve_all(tasks[:1]))

    def test_underflowed_composition_prior_names_cell(self) -> None:
        tasks = [
            Task(
                dynamics=[[[1.0], [1.0]]],
                reward=[[[pay], [0.0]]],
                gamma=0.5,
                beta=1.0,
                prior=uniform_prior(1, 2),
            )
            for pay in (1000.0, 900.0)
        ]
        spec = CompositionSpec(member_tasks=tasks, f=CompositionFunction(kind="min"))
        with pytest.raises(NumericFailureError) as exc_info:
            compose(spec, [solve(task, tolerance=1e-9) for task in tasks])
        assert exc_info.value.cell == (0, 1)


class TestCompositionDocuments:
    def test_load_from_file(self, tmp_path) -> None:
        tasks = member_tasks(np.random.default_rng(60), 2, 3, 2)
        for index, task in enumerate(tasks):
            save_task(task, tmp_path / f"member{index}.json")
        document = {
            "members": ["member0.json", "member1.json"],
            "f": {"kind": "wsum", "weights": [0.5, 0.5]},
        }
        path = tmp_path / "composition.json"
        path.write_text(json.dumps(document))

        spec = load_composition_spec(path)
        assert spec.num_members == 2
        assert spec.f.weights == [0.5, 0.5]
        loaded: Task = spec.member_tasks[1]
        assert np.array_equal(loaded.reward.values, tasks[1].reward.values)
