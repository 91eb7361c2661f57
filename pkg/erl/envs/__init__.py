from erl.envs.grid import (
    ACTION_NAMES,
    CellKind,
    GridSpec,
    cell_key,
    grid_from_dict,
    grid_to_dict,
    grid_to_task,
    parse_grid,
    render_grid,
)
from erl.envs.mazes import frozen_lake, simple_wall_maze, spiral_goals, spiral_maze
from erl.envs.random_tasks import (
    random_dynamics,
    random_policy,
    random_potential,
    random_reward,
    random_task,
)

__all__ = [
    "ACTION_NAMES",
    "CellKind",
    "GridSpec",
    "cell_key",
    "grid_from_dict",
    "grid_to_dict",
    "grid_to_task",
    "parse_grid",
    "render_grid",
    "frozen_lake",
    "simple_wall_maze",
    "spiral_goals",
    "spiral_maze",
    "random_dynamics",
    "random_policy",
    "random_potential",
    "random_reward",
    "random_task",
]
