"""Gridworld layouts and their encoding as tabular tasks.

States are the non-wall cells in row-major order. Actions are up, down, left and
right. The intended move happens with probability 1 - slip_prob and each of the two
lateral moves with slip_prob / 2; a move into a wall or off the board stays put.
Goal cells are absorbing self-loops with zero reward, and the goal's value is paid
on the transition that enters it. A neutral goal pays step_reward / (1 - gamma) on
entry, the discounted value of stepping forever, so reaching it gains nothing over
wandering.
"""
import logging
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from erl.core.io import task_to_dict
from erl.core.mdp import PolicyTable, Task, uniform_prior

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

ACTION_NAMES = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
LATERAL = ((2, 3), (2, 3), (0, 1), (0, 1))
ARROWS = ("^", "v", "<", ">")


class CellKind(str, Enum):
    FREE = "."
    WALL = "#"
    GOAL = "G"
    START = "S"


def cell_key(cell: Cell) -> str:
    return f"{cell[0]},{cell[1]}"


class GridSpec(BaseModel):
    layout: List[str]
    slip_prob: float = Field(default=0.0, ge=0.0, lt=1.0)
    step_reward: float = 0.0
    goal_reward: float = 1.0
    goal_values: Dict[str, float] = Field(default_factory=dict)
    neutral_goals: List[str] = Field(default_factory=list)

    @field_validator("layout")
    @classmethod
    def check_layout(cls, rows: List[str]) -> List[str]:
        if not rows or not rows[0]:
            raise ValueError("grid must have at least one row and one column")
        width = len(rows[0])
        for r, row in enumerate(rows):
            if len(row) != width:
                raise ValueError(f"ragged grid: row {r} has {len(row)} cells, expected {width}")
            unknown = set(row) - {kind.value for kind in CellKind}
            if unknown:
                raise ValueError(f"unknown grid characters {sorted(unknown)} in row {r}")
        if all(ch == CellKind.WALL.value for row in rows for ch in row):
            raise ValueError("grid has no free cells")
        return rows

    @model_validator(mode="after")
    def check_goal_values(self) -> "GridSpec":
        goals = {cell_key(cell) for cell in self.goal_cells()}
        stray = sorted(set(self.goal_values) - goals)
        if stray:
            raise ValueError(f"goal_values given for non-goal cells {stray}")
        stray = sorted(set(self.neutral_goals) - goals)
        if stray:
            raise ValueError(f"neutral_goals lists non-goal cells {stray}")
        both = sorted(set(self.neutral_goals) & set(self.goal_values))
        if both:
            raise ValueError(f"cells {both} are neutral and also carry a goal value")
        return self

    @property
    def height(self) -> int:
        return len(self.layout)

    @property
    def width(self) -> int:
        return len(self.layout[0])

    def kind(self, cell: Cell) -> CellKind:
        return CellKind(self.layout[cell[0]][cell[1]])

    def free_cells(self) -> List[Cell]:
        """Every non-wall cell, row-major; position i is state i."""
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if self.layout[r][c] != CellKind.WALL.value
        ]

    def goal_cells(self) -> List[Cell]:
        return [cell for cell in self.free_cells() if self.kind(cell) == CellKind.GOAL]

    def start_cells(self) -> List[Cell]:
        return [cell for cell in self.free_cells() if self.kind(cell) == CellKind.START]

    def goal_value(self, cell: Cell, gamma: float) -> float:
        if cell_key(cell) in self.neutral_goals:
            if not 0.0 < gamma < 1.0:
                raise ValueError(f"neutral goals need gamma in (0, 1), got {gamma}")
            return self.step_reward / (1.0 - gamma)
        return self.goal_values.get(cell_key(cell), self.goal_reward)

    def state_index(self) -> Dict[Cell, int]:
        return {cell: i for i, cell in enumerate(self.free_cells())}


def parse_grid(text: str, **fields: Any) -> GridSpec:
    """``#`` wall, ``.`` free, ``G`` goal, ``S`` start; one row per line."""
    rows = text.strip("\n").split("\n")
    return GridSpec(layout=rows, **fields)


def _step(spec: GridSpec, cell: Cell, move: Tuple[int, int]) -> Cell:
    r, c = cell[0] + move[0], cell[1] + move[1]
    if 0 <= r < spec.height and 0 <= c < spec.width and spec.layout[r][c] != CellKind.WALL.value:
        return (r, c)
    return cell


def _warn_unreachable(spec: GridSpec, transition: np.ndarray, index: Dict[Cell, int]) -> None:
    goals = spec.goal_cells()
    if not goals:
        return
    sources = spec.start_cells() or [cell for cell in index if spec.kind(cell) != CellKind.GOAL]
    if not sources:
        return
    graph = csr_matrix((transition.sum(axis=1) > 0.0).astype(float))
    reached = set()
    for cell in sources:
        order = breadth_first_order(graph, index[cell], return_predecessors=False)
        reached.update(int(i) for i in order)
    unreachable = [cell for cell in goals if index[cell] not in reached]
    if unreachable:
        logger.warning(f"Goal cells {unreachable} unreachable from {len(sources)} source cells")


def grid_to_task(
    spec: GridSpec,
    gamma: float,
    beta: float,
    prior: Optional[Union[PolicyTable, np.ndarray]] = None,
) -> Task:
    cells = spec.free_cells()
    index = spec.state_index()
    n, m = len(cells), len(MOVES)
    transition = np.zeros((n, m, n))
    is_goal = np.array([spec.kind(cell) == CellKind.GOAL for cell in cells])
    entry_reward = np.array(
        [
            spec.goal_value(cell, gamma) if goal else spec.step_reward
            for cell, goal in zip(cells, is_goal)
        ]
    )

    intended = 1.0 - spec.slip_prob
    lateral = spec.slip_prob / 2.0
    for s, cell in enumerate(cells):
        if is_goal[s]:
            transition[s, :, s] = 1.0
            continue
        for a, move in enumerate(MOVES):
            transition[s, a, index[_step(spec, cell, move)]] += intended
            for side in LATERAL[a]:
                transition[s, a, index[_step(spec, cell, MOVES[side])]] += lateral

    reward = np.broadcast_to(entry_reward[None, None, :], (n, m, n)).copy()
    reward[is_goal] = 0.0

    _warn_unreachable(spec, transition, index)
    return Task(
        dynamics=transition,
        reward=reward,
        gamma=gamma,
        beta=beta,
        prior=uniform_prior(n, m) if prior is None else prior,
    )


def grid_to_dict(spec: GridSpec, gamma: float, beta: float) -> Dict[str, Any]:
    """The Task document for the grid, plus a ``grid`` section holding the spec."""
    data = task_to_dict(grid_to_task(spec, gamma, beta))
    data["grid"] = spec.model_dump()
    return data


def grid_from_dict(data: Dict[str, Any]) -> GridSpec:
    return GridSpec(**data.get("grid", data))


def render_grid(spec: GridSpec, policy: Optional[PolicyTable] = None) -> str:
    """The layout as text; with a policy, free cells show the most likely action."""
    if policy is None:
        return "\n".join(spec.layout)
    rows = [list(row) for row in spec.layout]
    for s, (r, c) in enumerate(spec.free_cells()):
        if spec.kind((r, c)) != CellKind.GOAL:
            rows[r][c] = ARROWS[int(np.argmax(policy.probs[s]))]
    return "\n".join("".join(row) for row in rows)
