import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from erl import __version__
from erl.core.errors import ERLError, IdentityViolationError
from erl.harness.artifact import emit_outputs
from erl.harness.config import (
    EXPERIMENT_DEFAULTS,
    ExperimentConfig,
    create_experiment_config,
    load_experiment_config,
)
from erl.harness.experiments import run_experiment
from erl.utils.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 1
EXIT_IDENTITY_VIOLATION = 2


def common_options(func: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True), help="JSON config"),
        click.option("--out", "output_dir", type=click.Path(), help="Output directory"),
        click.option("--seed", type=int, help="Seed for random initializations"),
        click.option("--size", type=int, help="Maze size"),
        click.option("--slip", "slip_prob", type=float, help="Slip probability"),
        click.option("--beta", type=float, help="Inverse temperature"),
        click.option("--gamma", type=float, help="Discount factor"),
        click.option("--inits", "num_random_inits", type=int, help="Random initializations"),
        click.option("--init-scale", "init_scale", type=float, help="Bound of random initial Q"),
        click.option("--step-reward", "step_reward", type=float, help="Maze reward per step"),
        click.option("--goal-reward", "goal_reward", type=float, help="Maze reward on goal entry"),
        click.option("--name", help="Run name"),
        click.option("--svg", is_flag=True, help="Also write convergence.svg"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _build_config(
    kind: str, config_file: Optional[str], overrides: Dict[str, Any]
) -> ExperimentConfig:
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if config_file:
        return load_experiment_config(config_file, kind=kind, **overrides)
    return create_experiment_config(kind, **overrides)


def _execute(kind: str, config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    try:
        config = _build_config(kind, config_file, overrides)
        artifact = asyncio.run(run_experiment(config))
        output_dir = config.resolved_output_dir()
        written = emit_outputs(artifact, output_dir, svg=svg)
    except IdentityViolationError as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(EXIT_IDENTITY_VIOLATION)
    except (ERLError, ValidationError, ValueError, OSError, json.JSONDecodeError) as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(EXIT_INPUT_ERROR)

    click.echo(f"✅ {kind}: wrote {len(written)} files to {output_dir}")
    for name, residual in sorted(artifact.residuals.items()):
        click.echo(f"  {name}: {residual:.3e}")
    for name, verdict in sorted(artifact.verdicts.items()):
        click.echo(f"  {name}: {verdict}")


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    load_dotenv()
    setup_logging()


@main.command()
@click.option("--kind", type=click.Choice(sorted(EXPERIMENT_DEFAULTS)), default="shape-compare")
@click.option("--output", default="experiment.json", help="Output file path")
def init(kind: str, output: str) -> None:
    config = create_experiment_config(kind)
    Path(output).write_text(json.dumps(config.model_dump(mode="json", exclude_none=True), indent=2))
    click.echo(f"✅ Initialized {kind} config: {output}")
    click.echo(f"🚀 Run with: erl {COMMAND_FOR_KIND[kind]} --config {output}")


@main.command()
@common_options
@click.option("--task", "task_file", type=click.Path(exists=True), help="Task JSON document")
@click.option("--maze", type=click.Choice(["wall", "spiral", "frozen-lake", "grid"]))
@click.option("--grid", "grid_file", type=click.Path(exists=True), help="Grid text or JSON")
def solve(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Solve one task from several random initializations."""
    _execute("solve", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--goal", type=click.Choice(["left", "right", "down"]))
@click.option("--wall-height", "wall_height", type=int)
@click.option("--potential", "potential_file", type=click.Path(exists=True))
@click.option(
    "--potential-from-solution", "potential_solution_file", type=click.Path(exists=True)
)
def shape(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Compare convergence on a maze with and without a shaping potential."""
    _execute("shape-compare", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--f", "composition", type=click.Choice(["min", "max", "wsum", "product"]))
@click.option("--weight", "weights", type=float, multiple=True, help="wsum weight, repeatable")
@click.option("--spec", "composition_file", type=click.Path(exists=True))
def compose(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Compare the composed task solved directly with its corrective solve."""
    overrides["weights"] = list(overrides["weights"]) or None
    _execute("compose-compare", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--new-slip", "new_slip_prob", type=float, help="Slip probability after the change")
def dynamics(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Transfer a maze solution to changed dynamics."""
    _execute("dynamics-transfer", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--task", "task_file", type=click.Path(exists=True), help="Environment source")
@click.option("--policy", "policy_file", type=click.Path(exists=True))
@click.option("--value", "value_file", type=click.Path(exists=True))
def invrl(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Build the reward that makes a given policy soft-optimal and check it."""
    _execute("inverse-rl", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--new-slip", "new_slip_prob", type=float)
@click.option("--gamma-tilde", "gamma_tilde", type=float)
@click.option("--phi", "phi_file", type=click.Path(exists=True))
@click.option("--psi", "psi_file", type=click.Path(exists=True))
@click.option("--identifiability-literal", "identifiability_literal", is_flag=True, default=None)
def identify(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Evaluate the identifiability condition for two environments."""
    _execute("identifiability", config_file, svg, **overrides)


@main.command()
@common_options
@click.option("--sizes", type=str, help="Comma-separated maze sizes")
@click.option("--wall-heights", "wall_heights", type=str, help="Comma-separated wall heights")
def bench(config_file: Optional[str], svg: bool, **overrides: Any) -> None:
    """Sweep the shape comparison over maze sizes or wall heights."""
    for key in ("sizes", "wall_heights"):
        if overrides[key]:
            overrides[key] = [int(v) for v in overrides[key].split(",")]
    _execute("shape-sweep", config_file, svg, **overrides)


COMMAND_FOR_KIND = {
    "solve": "solve",
    "shape-compare": "shape",
    "compose-compare": "compose",
    "dynamics-transfer": "dynamics",
    "inverse-rl": "invrl",
    "identifiability": "identify",
    "shape-sweep": "bench",
}


if __name__ == "__main__":
    main()
