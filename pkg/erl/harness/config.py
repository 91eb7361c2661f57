import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, model_validator

from erl.utils.settings import HarnessSettings


class ExperimentKind(str, Enum):
    SOLVE = "solve"
    SHAPE_COMPARE = "shape-compare"
    COMPOSE_COMPARE = "compose-compare"
    DYNAMICS_TRANSFER = "dynamics-transfer"
    INVERSE_RL = "inverse-rl"
    IDENTIFIABILITY = "identifiability"
    SHAPE_SWEEP = "shape-sweep"


class MazeKind(str, Enum):
    WALL = "wall"
    SPIRAL = "spiral"
    FROZEN_LAKE = "frozen-lake"
    GRID = "grid"


DEFAULT_THRESHOLDS = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]

# resolved against the config file's directory when relative
PATH_FIELDS = (
    "task_file",
    "grid_file",
    "potential_file",
    "potential_solution_file",
    "composition_file",
    "phi_file",
    "psi_file",
    "policy_file",
    "value_file",
)


class ExperimentConfig(BaseModel):
    kind: ExperimentKind
    name: str = "run"
    beta: float = Field(default=1.0, gt=0.0)
    gamma: float = Field(default=0.9, gt=0.0, lt=1.0)
    tolerance: float = Field(default=1e-12, gt=0.0)
    max_iter: int = Field(default=100_000, ge=1)
    identity_tolerance: float = Field(default=1e-8, gt=0.0)
    thresholds: List[float] = Field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    num_random_inits: int = Field(default=1, ge=1)
    init_scale: Optional[float] = Field(default=None, ge=0.0)
    seed: int = 0
    output_dir: Optional[Path] = None
    workers: Optional[int] = Field(default=None, ge=1)

    # task sources
    task_file: Optional[Path] = None
    maze: Optional[MazeKind] = None
    grid_file: Optional[Path] = None
    size: int = 11
    wall_height: int = 1
    goal: str = "left"
    slip_prob: float = Field(default=0.0, ge=0.0, lt=1.0)
    step_reward: float = 0.0
    goal_reward: float = 1.0

    # shaping
    potential_file: Optional[Path] = None
    potential_solution_file: Optional[Path] = None

    # composition
    composition: Optional[str] = None
    weights: Optional[List[float]] = None
    composition_file: Optional[Path] = None

    # dynamics transfer and identifiability
    new_slip_prob: float = Field(default=0.2, ge=0.0, lt=1.0)
    gamma_tilde: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    phi_file: Optional[Path] = None
    psi_file: Optional[Path] = None
    identifiability_literal: bool = False

    # inverse rl
    policy_file: Optional[Path] = None
    value_file: Optional[Path] = None
    num_states: int = Field(default=6, ge=1)
    num_actions: int = Field(default=3, ge=1)

    # sweeps
    sizes: List[int] = Field(default_factory=list)
    wall_heights: List[int] = Field(default_factory=list)

    metadata: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        use_enum_values = True

    @model_validator(mode="after")
    def check_kind_fields(self) -> "ExperimentConfig":
        kind = ExperimentKind(self.kind)
        if any(t <= 0 for t in self.thresholds):
            raise ValueError("thresholds must be positive")
        if self.maze == MazeKind.GRID and self.grid_file is None:
            raise ValueError("maze 'grid' needs grid_file")

        if kind == ExperimentKind.SOLVE and self.task_file is None and self.maze is None:
            raise ValueError("solve needs task_file or maze")
        if kind in (ExperimentKind.SHAPE_COMPARE, ExperimentKind.SHAPE_SWEEP):
            if self.goal not in ("left", "right", "down"):
                raise ValueError(f"goal must be left, right or down, got {self.goal!r}")
        if kind == ExperimentKind.COMPOSE_COMPARE:
            if self.composition_file is None and self.composition is None:
                raise ValueError("compose-compare needs composition or composition_file")
            if self.composition == "wsum" and not self.weights:
                raise ValueError("wsum composition needs weights")
            if self.composition == "custom" and self.composition_file is None:
                raise ValueError("custom composition is only available through composition_file")
        if kind == ExperimentKind.INVERSE_RL and (self.policy_file is None) != (
            self.value_file is None
        ):
            raise ValueError("inverse-rl needs both policy_file and value_file, or neither")
        if kind == ExperimentKind.IDENTIFIABILITY and (self.phi_file is None) != (
            self.psi_file is None
        ):
            raise ValueError("identifiability needs both phi_file and psi_file, or neither")
        if kind == ExperimentKind.SHAPE_SWEEP and bool(self.sizes) == bool(self.wall_heights):
            raise ValueError("shape-sweep needs exactly one of sizes or wall_heights")
        return self

    def resolved_output_dir(self, settings: Optional[HarnessSettings] = None) -> Path:
        if self.output_dir is not None:
            return Path(self.output_dir)
        settings = settings or HarnessSettings()
        return settings.output_dir / f"{self.kind}-{self.name}"

    def resolved_workers(self, settings: Optional[HarnessSettings] = None) -> int:
        if self.workers is not None:
            return self.workers
        return (settings or HarnessSettings()).workers


# every step costs 1 until a rewarded goal is entered
TRANSFER_MAZE_DEFAULTS: Dict[str, Any] = {
    "step_reward": -1.0,
    "goal_reward": 0.0,
    "init_scale": 1.0,
}

EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "solve": {
        "beta": 3.0,
        "gamma": 0.99,
        "maze": "wall",
        "num_random_inits": 1,
    },
    "shape-compare": {
        "beta": 3.0,
        "gamma": 0.99,
        "maze": "wall",
        "size": 11,
        "num_random_inits": 10,
        **TRANSFER_MAZE_DEFAULTS,
    },
    "compose-compare": {
        "beta": 2.0,
        "gamma": 0.98,
        "maze": "spiral",
        "size": 11,
        "composition": "min",
        "num_random_inits": 25,
        **TRANSFER_MAZE_DEFAULTS,
    },
    "dynamics-transfer": {
        "beta": 3.0,
        "gamma": 0.99,
        "maze": "wall",
        "size": 11,
        "slip_prob": 0.0,
        "new_slip_prob": 0.2,
        "num_random_inits": 5,
    },
    "inverse-rl": {
        "beta": 2.0,
        "gamma": 0.9,
        "num_states": 6,
        "num_actions": 3,
        "identity_tolerance": 1e-6,
        "num_random_inits": 5,
    },
    "identifiability": {
        "beta": 2.0,
        "gamma": 0.9,
        "maze": "wall",
        "size": 7,
        "slip_prob": 0.0,
        "new_slip_prob": 0.2,
    },
    "shape-sweep": {
        "beta": 3.0,
        "gamma": 0.99,
        "maze": "wall",
        "sizes": [7, 11, 15],
        "num_random_inits": 5,
        **TRANSFER_MAZE_DEFAULTS,
    },
}


def create_experiment_config(kind: str, **overrides: Any) -> ExperimentConfig:
    defaults = dict(EXPERIMENT_DEFAULTS.get(kind, {}))
    if overrides.get("wall_heights") and not overrides.get("sizes"):
        defaults.pop("sizes", None)
    config_data = {
        "kind": kind,
        **defaults,
        **{key: value for key, value in overrides.items() if value is not None},
    }
    return ExperimentConfig(**config_data)


def load_experiment_config(
    path: Union[str, Path], kind: Optional[str] = None, **overrides: Any
) -> ExperimentConfig:
    """Kind defaults, then the file, then ``overrides``; later sources win."""
    path = Path(path)
    data = json.loads(path.read_text())
    for key in PATH_FIELDS:
        if data.get(key) is not None and not Path(data[key]).is_absolute():
            data[key] = str(path.parent / data[key])
    file_kind = data.pop("kind", None)
    kind = kind or file_kind
    if kind is None:
        raise ValueError(f"{path} does not name an experiment kind")
    if file_kind is not None and file_kind != kind:
        raise ValueError(f"{path} is a {file_kind!r} config, not {kind!r}")
    return create_experiment_config(kind, **{**data, **overrides})
