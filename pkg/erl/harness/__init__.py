from erl.harness.artifact import RunArtifact, emit_outputs
from erl.harness.config import (
    EXPERIMENT_DEFAULTS,
    ExperimentConfig,
    ExperimentKind,
    MazeKind,
    create_experiment_config,
    load_experiment_config,
)
from erl.harness.experiments import (
    run_compose_compare,
    run_dynamics_transfer,
    run_experiment,
    run_identifiability,
    run_inverse_rl,
    run_shape_compare,
    run_shape_sweep,
    run_solve,
)
from erl.harness.plotting import convergence_figure, save_convergence_svg

__all__ = [
    "RunArtifact",
    "emit_outputs",
    "EXPERIMENT_DEFAULTS",
    "ExperimentConfig",
    "ExperimentKind",
    "MazeKind",
    "create_experiment_config",
    "load_experiment_config",
    "run_compose_compare",
    "run_dynamics_transfer",
    "run_experiment",
    "run_identifiability",
    "run_inverse_rl",
    "run_shape_compare",
    "run_shape_sweep",
    "run_solve",
    "convergence_figure",
    "save_convergence_svg",
]
