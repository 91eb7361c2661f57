"""Parametric maze families used by the shaping and composition experiments.

Sibling tasks are built on one layout that marks every sibling's goal cells as
goals; each sibling marks the others' goals neutral, so the encoded tasks share
their dynamics bit for bit and differ only in reward.
"""
from typing import Iterable, List, Literal, Tuple

from erl.envs.grid import Cell, CellKind, GridSpec, cell_key

WallGoal = Literal["left", "right"]

FROZEN_LAKE_MAPS = {
    4: ["SFFF", "FHFH", "FFFH", "HFFG"],
    8: [
        "SFFFFFFF",
        "FFFFFFFF",
        "FFFHFFFF",
        "FFFFFHFF",
        "FFFHFFFF",
        "FHHFFFHF",
        "FHFFHFHF",
        "FFFHFFFG",
    ],
}


def _layout(size: int, walls: Iterable[Cell], goals: Iterable[Cell]) -> List[str]:
    rows = [[CellKind.FREE.value] * size for _ in range(size)]
    for r, c in walls:
        rows[r][c] = CellKind.WALL.value
    for r, c in goals:
        rows[r][c] = CellKind.GOAL.value
    return ["".join(row) for row in rows]


def _neutral(cells: Iterable[Cell], keep: Iterable[Cell]) -> List[str]:
    kept = set(keep)
    return [cell_key(cell) for cell in cells if cell not in kept]


def simple_wall_maze(
    size: int = 11, wall_height: int = 1, goal: WallGoal = "left", **fields: float
) -> GridSpec:
    """Square maze split by a wall hanging from the top of the central column.

    The wall's lower end sits ``wall_height`` rows above the bottom row, where the
    two goals occupy the corners. ``wall_height=1`` leaves only the bottom row open.
    """
    if size < 5 or size % 2 == 0:
        raise ValueError(f"wall maze size must be odd and at least 5, got {size}")
    if not 1 <= wall_height <= size - 2:
        raise ValueError(f"wall_height must be in [1, {size - 2}], got {wall_height}")
    if goal not in ("left", "right"):
        raise ValueError(f"goal must be 'left' or 'right', got {goal!r}")

    middle = size // 2
    walls = [(r, middle) for r in range(size - wall_height)]
    corners = {"left": (size - 1, 0), "right": (size - 1, size - 1)}
    return GridSpec(
        layout=_layout(size, walls, corners.values()),
        neutral_goals=_neutral(corners.values(), [corners[goal]]),
        **fields,
    )


def _spiral_walls(size: int) -> List[Cell]:
    """The top row, the right column and nested one-cell rings at even offsets.

    Each ring is opened once at the middle of a side, rotating top, right, bottom,
    left from the outermost ring inward, so corridors wind toward the open center.
    """
    middle = size // 2
    walls: List[Cell] = [(0, c) for c in range(size)] + [(r, size - 1) for r in range(1, size)]
    for ring, k in enumerate(range(2, (size - 1) // 2, 2)):
        far = size - 1 - k
        if far - k < 2:
            break
        border = (
            [(k, c) for c in range(k, far + 1)]
            + [(far, c) for c in range(k, far + 1)]
            + [(r, k) for r in range(k + 1, far)]
            + [(r, far) for r in range(k + 1, far)]
        )
        gap = [(k, middle), (middle, far), (far, middle), (middle, k)][ring % 4]
        walls.extend(cell for cell in border if cell != gap)
    return walls


def spiral_goals(size: int) -> Tuple[List[Cell], List[Cell]]:
    """Left-wall and bottom-wall goal cells; the bottom-left corner belongs to both.

    The cells next to the corner stay free so that the corner can be entered without
    crossing another goal.
    """
    corner = (size - 1, 0)
    left = [(r, 0) for r in range(1, size - 2)] + [corner]
    bottom = [corner] + [(size - 1, c) for c in range(2, size - 1)]
    return left, bottom


def spiral_maze(size: int = 11, **fields: float) -> Tuple[GridSpec, GridSpec]:
    """The (left wall, bottom wall) subtask pair of a spiral maze."""
    if size < 7 or size % 2 == 0:
        raise ValueError(f"spiral maze size must be odd and at least 7, got {size}")
    left, bottom = spiral_goals(size)
    goals = sorted(set(left) | set(bottom))
    layout = _layout(size, _spiral_walls(size), goals)
    return (
        GridSpec(layout=layout, neutral_goals=_neutral(goals, left), **fields),
        GridSpec(layout=layout, neutral_goals=_neutral(goals, bottom), **fields),
    )


def frozen_lake(size: int = 4, slip_prob: float = 2.0 / 3.0, **fields: float) -> GridSpec:
    """The classic lake maps with holes as walls.

    The default slip gives the intended and both lateral moves probability 1/3 each.
    """
    if size not in FROZEN_LAKE_MAPS:
        raise ValueError(f"frozen lake size must be one of {sorted(FROZEN_LAKE_MAPS)}, got {size}")
    translate = str.maketrans({"F": CellKind.FREE.value, "H": CellKind.WALL.value})
    layout = [row.translate(translate) for row in FROZEN_LAKE_MAPS[size]]
    return GridSpec(layout=layout, slip_prob=slip_prob, **fields)
