import json
import logging

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from erl.core.solver import ConvergenceTrace
from erl.envs.mazes import spiral_maze
from erl.harness.artifact import RunArtifact, emit_outputs
from erl.harness.config import (
    DEFAULT_THRESHOLDS,
    ExperimentKind,
    create_experiment_config,
    load_experiment_config,
)
from erl.harness.experiments import run_experiment
from erl.harness.plotting import convergence_figure, save_convergence_svg
from erl.utils.logging import setup_logging
from erl.utils.settings import HarnessSettings

QUICK = {"beta": 1.0, "gamma": 0.9, "size": 5, "num_random_inits": 3, "workers": 2}


class TestExperimentConfig:
    def test_kind_defaults(self) -> None:
        config = create_experiment_config("compose-compare")
        assert config.kind == ExperimentKind.COMPOSE_COMPARE.value
        assert (config.beta, config.gamma) == (2.0, 0.98)
        assert config.maze == "spiral"
        assert config.composition == "min"
        assert config.thresholds == DEFAULT_THRESHOLDS

    def test_transfer_kinds_charge_steps(self) -> None:
        for kind in ("shape-compare", "compose-compare", "shape-sweep"):
            config = create_experiment_config(kind)
            assert (config.step_reward, config.goal_reward) == (-1.0, 0.0)
            assert config.init_scale == 1.0
        solve_config = create_experiment_config("solve")
        assert (solve_config.step_reward, solve_config.goal_reward) == (0.0, 1.0)
        assert solve_config.init_scale is None

    def test_overrides_win(self) -> None:
        config = create_experiment_config("shape-compare", beta=1.5, seed=None)
        assert config.beta == 1.5
        assert config.seed == 0

    def test_wall_heights_replace_default_sizes(self) -> None:
        config = create_experiment_config("shape-sweep", wall_heights=[1, 3])
        assert config.sizes == []
        assert config.wall_heights == [1, 3]

    def test_invalid_kind(self) -> None:
        with pytest.raises(ValidationError):
            create_experiment_config("teleport")

    def test_wsum_needs_weights(self) -> None:
        with pytest.raises(ValidationError):
            create_experiment_config("compose-compare", composition="wsum")

    def test_gamma_range(self) -> None:
        with pytest.raises(ValidationError):
            create_experiment_config("solve", gamma=1.0)

    def test_thresholds_positive(self) -> None:
        with pytest.raises(ValidationError):
            create_experiment_config("solve", thresholds=[1e-3, 0.0])

    def test_load_resolves_relative_paths(self, tmp_path) -> None:
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"kind": "solve", "task_file": "task.json", "beta": 2.0}))
        config = load_experiment_config(path, beta=4.0)
        assert config.task_file == tmp_path / "task.json"
        assert config.beta == 4.0

    def test_load_rejects_other_kind(self, tmp_path) -> None:
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"kind": "solve", "maze": "wall"}))
        with pytest.raises(ValueError):
            load_experiment_config(path, kind="shape-compare")

    def test_output_dir_from_settings(self, tmp_path) -> None:
        config = create_experiment_config("solve", name="demo")
        settings = HarnessSettings(output_dir=tmp_path)
        assert config.resolved_output_dir(settings) == tmp_path / "solve-demo"

    def test_workers_from_environment(self, monkeypatch) -> None:
        monkeypatch.setenv("ERL_WORKERS", "3")
        assert create_experiment_config("solve").resolved_workers() == 3


class TestRunArtifact:
    def artifact(self) -> RunArtifact:
        config = create_experiment_config("solve", thresholds=[0.5, 0.05])
        artifact = RunArtifact(config=config)
        artifact.add_traces(
            "fast",
            [
                ConvergenceTrace(errors=[1.0, 0.1, 0.01], converged=True),
                ConvergenceTrace(errors=[0.8, 0.02], converged=True),
            ],
        )
        artifact.add_traces(
            "slow", [ConvergenceTrace(errors=[1.0, 0.6, 0.3, 0.1], converged=False)]
        )
        return artifact

    def test_summary_pads_finished_runs(self) -> None:
        frame = self.artifact().label_summary("fast")
        assert list(frame["iteration"]) == [1, 2, 3]
        np.testing.assert_allclose(frame["mean_error"], [0.9, 0.06, 0.015])
        np.testing.assert_allclose(frame["std_error"], [0.1, 0.04, 0.005])

    def test_single_trace_has_zero_spread(self) -> None:
        frame = self.artifact().label_summary("slow")
        assert np.all(frame["std_error"] == 0.0)

    def test_thresholds_table(self) -> None:
        table = self.artifact().thresholds()
        assert list(table.columns) == ["label", "threshold", "iterations"]
        slow = table[table["label"] == "slow"]
        assert list(slow["iterations"].astype(object)) == [3, pd.NA]

    def test_faster_at(self) -> None:
        verdict = self.artifact().faster_at("fast", "slow")
        assert verdict == {"0.5": True, "0.05": True}

    def test_emit_outputs(self, tmp_path) -> None:
        written = emit_outputs(self.artifact(), tmp_path, svg=True)
        names = {path.name for path in written}
        assert {"trace_fast_0.csv", "trace_fast_1.csv", "trace_slow_0.csv"} <= names
        assert {"summary.csv", "thresholds.csv", "run.json", "convergence.svg"} <= names
        record = json.loads((tmp_path / "run.json").read_text())
        assert record["num_traces"] == {"fast": 2, "slow": 1}
        assert (tmp_path / "convergence.svg").read_text().startswith("<svg")


class TestPlotting:
    def test_empty_summary(self, tmp_path) -> None:
        empty = pd.DataFrame(columns=["iteration", "mean_error", "std_error", "label"])
        path = save_convergence_svg(empty, tmp_path / "empty.svg")
        assert "<svg" in path.read_text()

    def test_one_line_per_label(self) -> None:
        frame = pd.DataFrame(
            {
                "iteration": [1, 2, 1, 2],
                "mean_error": [1.0, 0.0, 0.5, 0.25],
                "std_error": [0.0, 0.0, 0.1, 0.1],
                "label": ["a", "a", "b", "b"],
            }
        )
        ax = convergence_figure(frame, title="demo").axes[0]
        assert [line.get_label() for line in ax.get_lines()] == ["a", "b"]
        assert ax.get_yscale() == "log"
        assert ax.get_title() == "demo"

    def test_svg_is_stable(self, tmp_path) -> None:
        frame = pd.DataFrame(
            {"iteration": [1, 2], "mean_error": [1.0, 0.1], "std_error": [0.0, 0.0], "label": "a"}
        )
        first = save_convergence_svg(frame, tmp_path / "first.svg", title="demo").read_text()
        second = save_convergence_svg(frame, tmp_path / "second.svg", title="demo").read_text()
        assert first == second
        assert "demo" in first


class TestSetupLogging:
    @pytest.fixture(autouse=True)
    def restore_levels(self):
        loggers = [logging.getLogger(name) for name in ("erl", "matplotlib", "PIL")]
        levels = [logger.level for logger in loggers]
        yield
        for logger, level in zip(loggers, levels):
            logger.setLevel(level)

    def test_level_from_environment(self, monkeypatch) -> None:
        monkeypatch.setenv("ERL_LOG_LEVEL", "debug")
        setup_logging()
        assert logging.getLogger("erl").level == logging.DEBUG
        assert logging.getLogger("matplotlib").level == logging.WARNING

    def test_explicit_level_wins(self, monkeypatch) -> None:
        monkeypatch.setenv("ERL_LOG_LEVEL", "DEBUG")
        setup_logging("error")
        assert logging.getLogger("erl").level == logging.ERROR
        assert logging.getLogger("matplotlib").level == logging.ERROR

    def test_unknown_level(self) -> None:
        with pytest.raises(ValueError, match="unknown log level"):
            setup_logging("loud")


class TestExperiments:
    @pytest.mark.asyncio
    async def test_solve_writes_one_trace_per_init(self, tmp_path) -> None:
        config = create_experiment_config("solve", **QUICK)
        artifact = await run_experiment(config)
        written = emit_outputs(artifact, tmp_path)
        traces = [path for path in written if path.name.startswith("trace_")]
        assert len(traces) == 3
        assert artifact.verdicts["converged"]
        assert artifact.residuals["bellman"] <= config.tolerance
        assert len(artifact.extras["policy_map"]) == 5

        summary = pd.read_csv(tmp_path / "summary.csv")
        first = [pd.read_csv(path)["error"].iloc[0] for path in traces]
        assert summary["mean_error"].iloc[0] == pytest.approx(np.mean(first))

    @pytest.mark.asyncio
    async def test_short_run_keeps_every_sweep(self, tmp_path) -> None:
        config = create_experiment_config("solve", **{**QUICK, "max_iter": 3})
        artifact = await run_experiment(config)
        emit_outputs(artifact, tmp_path)
        assert not artifact.verdicts["converged"]
        assert len(pd.read_csv(tmp_path / "trace_solve_0.csv")) == 3

    @pytest.mark.asyncio
    async def test_runs_are_deterministic(self, tmp_path) -> None:
        config = create_experiment_config("shape-compare", **QUICK)
        first, second = tmp_path / "first", tmp_path / "second"
        emit_outputs(await run_experiment(config), first)
        emit_outputs(await run_experiment(config), second)
        for name in ("summary.csv", "thresholds.csv", "run.json", "trace_shaped_2.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    @pytest.mark.asyncio
    async def test_shape_compare(self) -> None:
        artifact = await run_experiment(create_experiment_config("shape-compare", **QUICK))
        assert artifact.residuals["shaped policy"] <= 1e-8
        assert artifact.residuals["shaped q"] <= 1e-8
        assert set(artifact.verdicts["shaped_faster_at"]) == {repr(t) for t in DEFAULT_THRESHOLDS}
        assert artifact.extras["potential_source"] == "sibling"

    @pytest.mark.asyncio
    async def test_compose_compare(self) -> None:
        config = create_experiment_config(
            "compose-compare", **{**QUICK, "size": 7, "beta": 2.0, "num_random_inits": 2}
        )
        artifact = await run_experiment(config)
        assert artifact.residuals["composition"] <= 1e-8
        assert artifact.residuals["composition policy"] <= 1e-8
        assert "zero_shot" in artifact.solutions
        assert artifact.extras["zero_shot_gap"] >= 0.0

    @pytest.mark.asyncio
    async def test_convex_weighted_sum_bound(self) -> None:
        config = create_experiment_config(
            "compose-compare",
            **{**QUICK, "size": 7, "num_random_inits": 1},
            composition="wsum",
            weights=[0.5, 0.5],
        )
        artifact = await run_experiment(config)
        assert artifact.verdicts["zero_shot_upper_bound"]

    @pytest.mark.asyncio
    async def test_dynamics_transfer(self) -> None:
        artifact = await run_experiment(create_experiment_config("dynamics-transfer", **QUICK))
        assert artifact.residuals["dynamics change"] <= 1e-8
        assert artifact.residuals["free solution"] <= 1e-8
        assert artifact.extras["slip"] == {"base": 0.0, "new": 0.2}

    @pytest.mark.asyncio
    async def test_inverse_rl(self) -> None:
        artifact = await run_experiment(create_experiment_config("inverse-rl", num_random_inits=2))
        assert artifact.residuals["inverse policy"] <= 1e-6
        assert artifact.residuals["inverse value"] <= 1e-6

    @pytest.mark.asyncio
    async def test_identifiability_with_zero_potentials(self) -> None:
        artifact = await run_experiment(create_experiment_config("identifiability"))
        assert artifact.residuals["identifiability"] == 0.0
        assert artifact.verdicts["defeats_identifiability"] is False

    @pytest.mark.asyncio
    async def test_shape_sweep(self, tmp_path) -> None:
        config = create_experiment_config(
            "shape-sweep", **{**QUICK, "num_random_inits": 2}, sizes=[5, 7]
        )
        artifact = await run_experiment(config)
        rows = artifact.tables["sweep"]
        assert [row["value"] for row in rows] == [5, 7]
        assert isinstance(artifact.verdicts["savings_nondecreasing"], bool)
        assert artifact.resources["peak_rss_bytes"] > 0

        written = {path.name for path in emit_outputs(artifact, tmp_path)}
        assert {"sweep.csv", "resources.json"} <= written
        assert "resources" not in json.loads((tmp_path / "run.json").read_text())


@pytest.mark.slow
class TestConvergenceOrderings:
    @pytest.mark.asyncio
    async def test_sibling_shaping_wins_at_every_threshold(self) -> None:
        config = create_experiment_config("shape-compare", workers=4)
        assert (config.size, config.beta, config.gamma, config.num_random_inits) == (
            11,
            3.0,
            0.99,
            10,
        )
        artifact = await run_experiment(config)
        assert artifact.verdicts["shaped_faster_at"] == {repr(t): True for t in DEFAULT_THRESHOLDS}

    @pytest.mark.asyncio
    @pytest.mark.parametrize("composition", ["min", "max"])
    async def test_corrective_wins_on_spiral(self, composition: str) -> None:
        config = create_experiment_config("compose-compare", composition=composition, workers=4)
        assert (config.beta, config.gamma, config.num_random_inits) == (2.0, 0.98, 25)
        artifact = await run_experiment(config)
        faster = artifact.verdicts["corrective_faster_at"]
        assert faster["0.0001"] is True
        assert all(faster.values())
        assert artifact.residuals["composition"] <= config.identity_tolerance

    @pytest.mark.asyncio
    async def test_min_composition_is_not_trivial(self) -> None:
        config = create_experiment_config("compose-compare", num_random_inits=1)
        artifact = await run_experiment(config)
        v = artifact.solutions["direct"].v
        index = spiral_maze(size=11)[0].state_index()
        # next to the shared corner the composed task is nearly free; deep inside it is not
        assert v[index[(9, 0)]] > -1.0
        assert v[index[(5, 5)]] < -10.0
        assert artifact.extras["max_abs_corrective"] > 1.0

    @pytest.mark.asyncio
    async def test_savings_grow_with_maze_size(self) -> None:
        artifact = await run_experiment(create_experiment_config("shape-sweep", workers=4))
        savings = [row["savings"] for row in artifact.tables["sweep"]]
        assert [row["value"] for row in artifact.tables["sweep"]] == [7, 11, 15]
        assert all(saved is not None and saved > 0 for saved in savings)
        assert savings == sorted(savings)
        assert artifact.verdicts["savings_nondecreasing"]
