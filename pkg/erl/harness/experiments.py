"""Experiment pipelines behind the CLI.

Independent solver runs fan out through ``asyncio.to_thread`` under a semaphore
sized by the worker count. Random initial Q-tables are drawn up front from one
seeded generator and results come back in submission order, so a run's outputs
depend only on its config.
"""
import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Awaitable, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from erl.core.io import load_solution, load_task
from erl.core.mdp import PolicyTable, Task, TaskEnvironment, uniform_prior
from erl.core.solver import QTable, SoftSolution, bellman_residual, random_initialization, solve
from erl.envs.grid import GridSpec, grid_from_dict, grid_to_task, parse_grid, render_grid
from erl.envs.mazes import frozen_lake, simple_wall_maze, spiral_maze
from erl.envs.random_tasks import random_dynamics, random_policy, random_potential
from erl.harness.artifact import RunArtifact
from erl.harness.config import ExperimentConfig, ExperimentKind, MazeKind
from erl.shaping.inverse import defeats_identifiability, identifiability_residual, inverse_reward
from erl.shaping.potential import Potential, load_potential, potential_from_solution, shape
from erl.transfer.composition import (
    CompositionFunction,
    CompositionKind,
    CompositionSpec,
    compose,
    composed_task,
    load_composition_spec,
    zero_shot,
)
from erl.transfer.corrective import (
    CorrectiveProblem,
    check_identity,
    combine,
    dynamics_change_corrective,
    free_solution_reward,
)

logger = logging.getLogger(__name__)


def _reward_fields(config: ExperimentConfig) -> Dict[str, float]:
    return {"step_reward": config.step_reward, "goal_reward": config.goal_reward}


def build_grid(
    config: ExperimentConfig,
    goal: Optional[str] = None,
    slip_prob: Optional[float] = None,
    size: Optional[int] = None,
) -> GridSpec:
    maze = MazeKind(config.maze or MazeKind.WALL)
    goal = goal or config.goal
    slip = config.slip_prob if slip_prob is None else slip_prob
    size = size or config.size
    fields = _reward_fields(config)

    if maze == MazeKind.WALL:
        return simple_wall_maze(size, config.wall_height, goal, slip_prob=slip, **fields)
    if maze == MazeKind.SPIRAL:
        left, down = spiral_maze(size, slip_prob=slip, **fields)
        return left if goal == "left" else down
    if maze == MazeKind.FROZEN_LAKE:
        return frozen_lake(size, slip_prob=slip, **fields)

    path = Path(str(config.grid_file))
    text = path.read_text()
    if path.suffix == ".json":
        return grid_from_dict(json.loads(text)).model_copy(update={"slip_prob": slip})
    return parse_grid(text, slip_prob=slip)


def sibling_grids(config: ExperimentConfig) -> Tuple[GridSpec, Optional[GridSpec]]:
    """The target maze and, for the two-goal families, its reward-varying sibling."""
    maze = MazeKind(config.maze or MazeKind.WALL)
    target = build_grid(config)
    if maze == MazeKind.WALL:
        return target, build_grid(config, goal="right" if config.goal == "left" else "left")
    if maze == MazeKind.SPIRAL:
        return target, build_grid(config, goal="down" if config.goal == "left" else "left")
    return target, None


def member_grids(config: ExperimentConfig) -> List[GridSpec]:
    maze = MazeKind(config.maze or MazeKind.SPIRAL)
    if maze == MazeKind.SPIRAL:
        return list(spiral_maze(config.size, slip_prob=config.slip_prob, **_reward_fields(config)))
    if maze == MazeKind.WALL:
        return [build_grid(config, goal=goal) for goal in ("left", "right")]
    raise ValueError(f"maze {maze.value!r} has no reward-varying member family")


def draw_initializations(
    task: Task, config: ExperimentConfig, rng: np.random.Generator
) -> List[QTable]:
    return [
        random_initialization(task, rng, config.init_scale)
        for _ in range(config.num_random_inits)
    ]


async def solve_many(
    task: Task,
    q0s: Sequence[Optional[QTable]],
    config: ExperimentConfig,
    semaphore: asyncio.Semaphore,
) -> List[SoftSolution]:
    async def run_one(q0: Optional[QTable]) -> SoftSolution:
        async with semaphore:
            return await asyncio.to_thread(solve, task, config.tolerance, config.max_iter, q0)

    return list(await asyncio.gather(*(run_one(q0) for q0 in q0s)))


async def solve_tasks(
    tasks: Sequence[Task], config: ExperimentConfig, semaphore: asyncio.Semaphore
) -> List[SoftSolution]:
    results = await asyncio.gather(*(solve_many(task, [None], config, semaphore) for task in tasks))
    return [solutions[0] for solutions in results]


def _setup(config: ExperimentConfig) -> Tuple[np.random.Generator, asyncio.Semaphore, RunArtifact]:
    return (
        np.random.default_rng(config.seed),
        asyncio.Semaphore(config.resolved_workers()),
        RunArtifact(config=config),
    )


def _verify_corrective(
    artifact: RunArtifact,
    name: str,
    corrective: CorrectiveProblem,
    k_solutions: Sequence[SoftSolution],
    direct: Sequence[SoftSolution],
) -> SoftSolution:
    """Check base_q + K* against each directly solved Q~*; returns the first combined solution."""
    tolerance = artifact.config.identity_tolerance
    combined = [combine(corrective, k, tolerance=tolerance) for k in k_solutions]
    artifact.residuals[name] = max(
        check_identity(name, d.q, c.q, tolerance) for d, c in zip(direct, combined)
    )
    artifact.residuals[f"{name} policy"] = max(
        check_identity(f"{name} policy", d.policy.probs, c.policy.probs, tolerance)
        for d, c in zip(direct, combined)
    )
    return combined[0]


async def run_solve(config: ExperimentConfig) -> RunArtifact:
    rng, semaphore, artifact = _setup(config)
    spec = None
    if config.task_file is not None:
        task = load_task(config.task_file)
    else:
        spec = build_grid(config)
        task = grid_to_task(spec, config.gamma, config.beta)

    q0s = draw_initializations(task, config, rng)
    solutions = await solve_many(task, q0s, config, semaphore)

    artifact.add_traces("solve", [s.trace for s in solutions])
    artifact.solutions["solve"] = solutions[0]
    artifact.residuals["bellman"] = bellman_residual(solutions[0].q, task)
    artifact.verdicts["converged"] = all(s.trace.converged for s in solutions)
    if spec is not None:
        artifact.extras["policy_map"] = render_grid(spec, solutions[0].policy).split("\n")
    logger.info(f"Solved {task!r} from {len(q0s)} initializations")
    return artifact


async def run_shape_compare(config: ExperimentConfig) -> RunArtifact:
    rng, semaphore, artifact = _setup(config)
    target_spec, sibling_spec = sibling_grids(config)
    target = grid_to_task(target_spec, config.gamma, config.beta)

    if config.potential_file is not None:
        potential = load_potential(config.potential_file)
        artifact.extras["potential_source"] = "file"
    elif config.potential_solution_file is not None:
        potential = potential_from_solution(load_solution(config.potential_solution_file))
        artifact.extras["potential_source"] = "solution file"
    elif sibling_spec is not None:
        sibling = grid_to_task(sibling_spec, config.gamma, config.beta)
        (sibling_solution,) = await solve_tasks([sibling], config, semaphore)
        potential = potential_from_solution(sibling_solution)
        artifact.extras["potential_source"] = "sibling"
    else:
        raise ValueError(f"maze {config.maze!r} has no sibling task; pass a potential file")

    shaped = shape(target, potential)
    q0s = draw_initializations(target, config, rng)
    unshaped_solutions, shaped_solutions = await asyncio.gather(
        solve_many(target, q0s, config, semaphore),
        solve_many(shaped.task, q0s, config, semaphore),
    )

    phi = shaped.potential.phi
    tolerance = config.identity_tolerance
    pairs = list(zip(unshaped_solutions, shaped_solutions))
    artifact.residuals["shaped policy"] = max(
        check_identity("shaped policy", s.policy.probs, u.policy.probs, tolerance) for u, s in pairs
    )
    artifact.residuals["shaped q"] = max(
        check_identity("shaped q", s.q, u.q - phi[:, None], tolerance) for u, s in pairs
    )

    artifact.add_traces("unshaped", [s.trace for s in unshaped_solutions])
    artifact.add_traces("shaped", [s.trace for s in shaped_solutions])
    artifact.solutions["unshaped"] = unshaped_solutions[0]
    artifact.solutions["shaped"] = shaped_solutions[0]
    artifact.verdicts["shaped_faster_at"] = artifact.faster_at("shaped", "unshaped")
    artifact.extras["num_states"] = target.num_states
    logger.info(f"Shape comparison on {target.num_states} states finished")
    return artifact


def _composition_spec(config: ExperimentConfig) -> CompositionSpec:
    if config.composition_file is not None:
        return load_composition_spec(config.composition_file)
    members = [grid_to_task(g, config.gamma, config.beta) for g in member_grids(config)]
    f = CompositionFunction(kind=CompositionKind(config.composition), weights=config.weights)
    return CompositionSpec(member_tasks=members, f=f)


async def run_compose_compare(config: ExperimentConfig) -> RunArtifact:
    rng, semaphore, artifact = _setup(config)
    spec = _composition_spec(config)
    member_solutions = await solve_tasks(spec.member_tasks, config, semaphore)

    _, corrective = compose(spec, member_solutions)
    target = composed_task(spec)
    q0s = draw_initializations(target, config, rng)
    direct, k_solutions = await asyncio.gather(
        solve_many(target, q0s, config, semaphore),
        solve_many(corrective.task, q0s, config, semaphore),
    )
    _verify_corrective(artifact, "composition", corrective, k_solutions, direct)

    zero = zero_shot(spec, member_solutions)
    artifact.extras["zero_shot_gap"] = float(np.max(np.abs(zero.q - direct[0].q)))
    artifact.extras["max_abs_corrective"] = float(np.max(np.abs(k_solutions[0].q)))
    weights = np.asarray(spec.f.weights or [], dtype=float)
    if spec.f.is_linear and np.all(weights >= 0) and np.isclose(weights.sum(), 1.0):
        artifact.verdicts["zero_shot_upper_bound"] = bool(
            np.all(k_solutions[0].q <= config.identity_tolerance)
        )

    artifact.add_traces("direct", [s.trace for s in direct])
    artifact.add_traces("corrective", [s.trace for s in k_solutions])
    artifact.solutions["direct"] = direct[0]
    artifact.solutions["corrective"] = k_solutions[0]
    artifact.solutions["zero_shot"] = zero
    artifact.verdicts["corrective_faster_at"] = artifact.faster_at("corrective", "direct")
    logger.info(f"{spec.f.kind} composition of {spec.num_members} tasks verified")
    return artifact


async def run_dynamics_transfer(config: ExperimentConfig) -> RunArtifact:
    rng, semaphore, artifact = _setup(config)
    base_task = grid_to_task(build_grid(config), config.gamma, config.beta)
    new_dynamics = grid_to_task(
        build_grid(config, slip_prob=config.new_slip_prob), config.gamma, config.beta
    ).dynamics
    target = base_task.replace(dynamics=new_dynamics)

    (base_solution,) = await solve_tasks([base_task], config, semaphore)
    corrective = dynamics_change_corrective(base_solution, new_dynamics, base_task)
    free_task = base_task.replace(
        dynamics=new_dynamics, reward=free_solution_reward(base_solution, new_dynamics, base_task)
    )

    q0s = draw_initializations(target, config, rng)
    direct, k_solutions, (free_solution,) = await asyncio.gather(
        solve_many(target, q0s, config, semaphore),
        solve_many(corrective.task, q0s, config, semaphore),
        solve_tasks([free_task], config, semaphore),
    )
    _verify_corrective(artifact, "dynamics change", corrective, k_solutions, direct)
    artifact.residuals["free solution"] = check_identity(
        "free solution", free_solution.q, base_solution.q, config.identity_tolerance
    )

    artifact.add_traces("direct", [s.trace for s in direct])
    artifact.add_traces("corrective", [s.trace for s in k_solutions])
    artifact.solutions["direct"] = direct[0]
    artifact.solutions["corrective"] = k_solutions[0]
    artifact.verdicts["corrective_faster_at"] = artifact.faster_at("corrective", "direct")
    artifact.extras["slip"] = {"base": config.slip_prob, "new": config.new_slip_prob}
    logger.info(f"Dynamics transfer {config.slip_prob} -> {config.new_slip_prob} verified")
    return artifact


def _inverse_environment(config: ExperimentConfig, rng: np.random.Generator) -> TaskEnvironment:
    if config.task_file is not None:
        return load_task(config.task_file).environment
    if config.maze is not None:
        return grid_to_task(build_grid(config), config.gamma, config.beta).environment
    return TaskEnvironment(
        dynamics=random_dynamics(rng, config.num_states, config.num_actions),
        gamma=config.gamma,
        beta=config.beta,
        prior=uniform_prior(config.num_states, config.num_actions),
    )


async def run_inverse_rl(config: ExperimentConfig) -> RunArtifact:
    rng, semaphore, artifact = _setup(config)
    environment = _inverse_environment(config, rng)
    if config.policy_file is not None and config.value_file is not None:
        policy = PolicyTable(probs=json.loads(Path(config.policy_file).read_text()))
        value = load_potential(config.value_file)
    else:
        policy = random_policy(rng, environment.num_states, environment.num_actions)
        value = random_potential(rng, environment.num_states)

    task = environment.with_reward(inverse_reward(policy, value, environment))
    q0s = draw_initializations(task, config, rng)
    solutions = await solve_many(task, q0s, config, semaphore)

    tolerance = config.identity_tolerance
    artifact.residuals["inverse policy"] = max(
        check_identity("inverse policy", s.policy.probs, policy.probs, tolerance) for s in solutions
    )
    artifact.residuals["inverse value"] = max(
        check_identity("inverse value", s.v, value.phi, tolerance) for s in solutions
    )
    artifact.add_traces("inverse", [s.trace for s in solutions])
    artifact.solutions["inverse"] = solutions[0]
    logger.info(f"Inverse reward recovered target policy on {task.num_states} states")
    return artifact


async def run_identifiability(config: ExperimentConfig) -> RunArtifact:
    _, _, artifact = _setup(config)
    p = grid_to_task(build_grid(config), config.gamma, config.beta).dynamics
    q = grid_to_task(
        build_grid(config, slip_prob=config.new_slip_prob), config.gamma, config.beta
    ).dynamics
    if config.phi_file is not None and config.psi_file is not None:
        phi, psi = load_potential(config.phi_file), load_potential(config.psi_file)
    else:
        phi, psi = Potential.zeros(p.num_states), Potential.zeros(p.num_states)
    gamma_tilde = config.gamma_tilde if config.gamma_tilde is not None else config.gamma

    residual = identifiability_residual(
        p, config.gamma, phi, q, gamma_tilde, psi, literal=config.identifiability_literal
    )
    artifact.residuals["identifiability"] = float(np.max(np.abs(residual)))
    artifact.verdicts["defeats_identifiability"] = defeats_identifiability(residual, phi, psi)
    artifact.extras["literal"] = config.identifiability_literal
    artifact.extras["gamma_tilde"] = gamma_tilde
    return artifact


async def run_shape_sweep(config: ExperimentConfig) -> RunArtifact:
    """Shape comparisons over maze sizes or wall heights, with resource readings."""
    artifact = RunArtifact(config=config)
    field = "size" if config.sizes else "wall_height"
    values = config.sizes or config.wall_heights
    threshold = min(config.thresholds)
    process = psutil.Process()
    peak_rss = process.memory_info().rss
    started = time.perf_counter()
    seconds: List[float] = []
    savings: List[Optional[int]] = []

    for value in values:
        setting_started = time.perf_counter()
        sub = config.model_copy(
            update={
                "kind": ExperimentKind.SHAPE_COMPARE.value,
                field: value,
                "sizes": [],
                "wall_heights": [],
            }
        )
        result = await run_shape_compare(sub)
        seconds.append(time.perf_counter() - setting_started)
        peak_rss = max(peak_rss, process.memory_info().rss)

        for label, traces in result.traces.items():
            artifact.add_traces(f"{label}_{field}{value}", traces)
        for name, residual in result.residuals.items():
            artifact.residuals[f"{name} {field}={value}"] = residual

        unshaped = result.iterations_to("unshaped", threshold)
        shaped = result.iterations_to("shaped", threshold)
        saved = unshaped - shaped if unshaped is not None and shaped is not None else None
        savings.append(saved)
        artifact.tables.setdefault("sweep", []).append(
            {
                "setting": field,
                "value": value,
                "num_states": result.extras["num_states"],
                "threshold": threshold,
                "unshaped_iterations": unshaped,
                "shaped_iterations": shaped,
                "savings": saved,
            }
        )

    artifact.verdicts["savings_nondecreasing"] = all(s is not None for s in savings) and all(
        later >= earlier for earlier, later in zip(savings, savings[1:])  # type: ignore[operator]
    )
    artifact.resources = {
        "wall_clock_seconds": time.perf_counter() - started,
        "per_setting_seconds": dict(zip(map(str, values), seconds)),
        "peak_rss_bytes": int(peak_rss),
    }
    logger.info(f"Shape sweep over {field} {values} finished")
    return artifact


RUNNERS: Dict[str, Callable[[ExperimentConfig], Awaitable[RunArtifact]]] = {
    ExperimentKind.SOLVE.value: run_solve,
    ExperimentKind.SHAPE_COMPARE.value: run_shape_compare,
    ExperimentKind.COMPOSE_COMPARE.value: run_compose_compare,
    ExperimentKind.DYNAMICS_TRANSFER.value: run_dynamics_transfer,
    ExperimentKind.INVERSE_RL.value: run_inverse_rl,
    ExperimentKind.IDENTIFIABILITY.value: run_identifiability,
    ExperimentKind.SHAPE_SWEEP.value: run_shape_sweep,
}


async def run_experiment(config: ExperimentConfig) -> RunArtifact:
    return await RUNNERS[ExperimentKind(config.kind).value](config)
