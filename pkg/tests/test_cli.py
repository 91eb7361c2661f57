import json

from click.testing import CliRunner

from erl import cli
from erl.core.errors import IdentityViolationError

QUICK_ARGS = ["--size", "5", "--gamma", "0.9", "--beta", "1.0", "--inits", "2"]


class TestInit:
    def test_writes_kind_defaults(self, tmp_path) -> None:
        output = tmp_path / "experiment.json"
        result = CliRunner().invoke(cli.main, ["init", "--kind", "solve", "--output", str(output)])
        assert result.exit_code == 0
        data = json.loads(output.read_text())
        assert data["kind"] == "solve"
        assert data["maze"] == "wall"
        assert "erl solve" in result.output


class TestCommands:
    def test_solve_maze(self, tmp_path) -> None:
        out = tmp_path / "run"
        result = CliRunner().invoke(
            cli.main, ["solve", "--maze", "wall", *QUICK_ARGS, "--out", str(out), "--svg"]
        )
        assert result.exit_code == 0, result.output
        assert (out / "trace_solve_0.csv").exists()
        assert (out / "trace_solve_1.csv").exists()
        assert (out / "convergence.svg").exists()
        assert "bellman" in result.output

    def test_solve_from_config(self, tmp_path) -> None:
        config = tmp_path / "experiment.json"
        runner = CliRunner()
        runner.invoke(cli.main, ["init", "--kind", "solve", "--output", str(config)])
        out = tmp_path / "run"
        result = runner.invoke(
            cli.main, ["solve", "--config", str(config), *QUICK_ARGS, "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        record = json.loads((out / "run.json").read_text())
        assert record["config"]["size"] == 5
        assert record["config"]["gamma"] == 0.9

    def test_identify_literal_flag(self, tmp_path) -> None:
        out = tmp_path / "run"
        result = CliRunner().invoke(
            cli.main, ["identify", "--identifiability-literal", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        record = json.loads((out / "run.json").read_text())
        assert record["extras"]["literal"] is True
        assert record["verdicts"]["defeats_identifiability"] is False

    def test_bench_parses_lists(self, tmp_path) -> None:
        out = tmp_path / "run"
        result = CliRunner().invoke(
            cli.main, ["bench", "--sizes", "5,7", *QUICK_ARGS, "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert (out / "sweep.csv").exists()

    def test_reward_and_init_flags(self, tmp_path) -> None:
        out = tmp_path / "run"
        result = CliRunner().invoke(
            cli.main,
            [
                "shape",
                *QUICK_ARGS,
                "--step-reward",
                "-0.5",
                "--goal-reward",
                "2",
                "--init-scale",
                "0",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        config = json.loads((out / "run.json").read_text())["config"]
        assert (config["step_reward"], config["goal_reward"]) == (-0.5, 2.0)
        assert config["init_scale"] == 0.0


class TestExitCodes:
    def test_invalid_input(self, tmp_path) -> None:
        result = CliRunner().invoke(
            cli.main, ["compose", "--f", "wsum", "--out", str(tmp_path / "run")]
        )
        assert result.exit_code == 1
        assert not (tmp_path / "run").exists()

    def test_out_of_range_maze(self, tmp_path) -> None:
        result = CliRunner().invoke(
            cli.main, ["solve", "--maze", "wall", "--size", "4", "--out", str(tmp_path / "run")]
        )
        assert result.exit_code == 1

    def test_identity_violation(self, tmp_path, monkeypatch) -> None:
        async def violated(config: object) -> None:
            raise IdentityViolationError("shaped q", 1e-3, 1e-8, (0, 0))

        monkeypatch.setattr(cli, "run_experiment", violated)
        result = CliRunner().invoke(
            cli.main, ["shape", "--out", str(tmp_path / "run"), *QUICK_ARGS]
        )
        assert result.exit_code == 2
