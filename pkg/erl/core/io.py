"""JSON documents for tasks, solutions and potentials, CSV for convergence traces.

Floats are written with ``repr`` precision by the json module, so a
save/load round trip reproduces every table bit-exactly.
"""
import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from erl.core.mdp import PolicyTable, Task
from erl.core.solver import ConvergenceTrace, SoftSolution

PathLike = Union[str, Path]


def task_to_dict(task: Task) -> Dict[str, Any]:
    return {
        "num_states": task.num_states,
        "num_actions": task.num_actions,
        "gamma": task.gamma,
        "beta": task.beta,
        "prior": task.prior.probs.tolist(),
        "transition": task.dynamics.transition.tolist(),
        "reward": task.reward.values.tolist(),
        "reward_rank": 3,
    }


def task_from_dict(data: Dict[str, Any]) -> Task:
    reward = np.asarray(data["reward"], dtype=float)
    rank = int(data.get("reward_rank", reward.ndim))
    if rank != reward.ndim:
        raise ValueError(f"reward_rank {rank} does not match reward array of rank {reward.ndim}")
    task = Task(
        dynamics=data["transition"],
        reward=reward,
        gamma=float(data["gamma"]),
        beta=float(data["beta"]),
        prior=data["prior"],
    )
    for name in ("num_states", "num_actions"):
        if name in data and int(data[name]) != getattr(task, name):
            raise ValueError(
                f"{name}={data[name]} disagrees with table shapes ({getattr(task, name)})"
            )
    return task


def save_task(task: Task, path: PathLike) -> None:
    Path(path).write_text(json.dumps(task_to_dict(task), indent=2))


def load_task(path: PathLike) -> Task:
    return task_from_dict(json.loads(Path(path).read_text()))


def solution_to_dict(solution: SoftSolution) -> Dict[str, Any]:
    return {
        "q": solution.q.tolist(),
        "v": solution.v.tolist(),
        "policy": solution.policy.probs.tolist(),
        "trace": solution.trace.model_dump(),
    }


def solution_from_dict(data: Dict[str, Any]) -> SoftSolution:
    return SoftSolution(
        q=np.asarray(data["q"], dtype=float),
        v=np.asarray(data["v"], dtype=float),
        policy=PolicyTable(probs=data["policy"]),
        trace=ConvergenceTrace(**data.get("trace", {})),
    )


def save_solution(solution: SoftSolution, path: PathLike) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(solution), indent=2))


def load_solution(path: PathLike) -> SoftSolution:
    return solution_from_dict(json.loads(Path(path).read_text()))


def trace_to_frame(trace: ConvergenceTrace) -> pd.DataFrame:
    return pd.DataFrame(
        {"iteration": np.arange(1, trace.iterations + 1), "error": np.asarray(trace.errors)}
    )


def trace_to_csv(trace: ConvergenceTrace, path: PathLike) -> None:
    trace_to_frame(trace).to_csv(path, index=False)
