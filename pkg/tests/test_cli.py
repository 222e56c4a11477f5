import json

import pytest
from click.testing import CliRunner

from declab.cli import main


@pytest.fixture
def runner():
    return CliRunner()


class TestSim:
    def test_list_names_all_presets(self, runner):
        result = runner.invoke(main, ["sim", "list"])
        assert result.exit_code == 0
        for name in ("hte-signflip", "chain-mdp-2metric", "bandit-drift",
                     "bandit-imbalanced"):
            assert name in result.output

    def test_run_prints_summary_json(self, runner):
        result = runner.invoke(main, ["sim", "run", "--env",
                                      "bandit-imbalanced", "--seed", "3",
                                      "--n", "500"])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["rows"] == 500
        assert 0.0 <= summary["success"]["mean"] <= 1.0
        assert set(summary["actions"]) <= {"keep", "send"}

    def test_run_deterministic_under_seed(self, runner):
        args = ["sim", "run", "--env", "hte-signflip", "--seed", "7",
                "--n", "200"]
        a = runner.invoke(main, args).output
        b = runner.invoke(main, args).output
        assert a == b

    def test_run_unknown_env_fails_with_hint(self, runner):
        result = runner.invoke(main, ["sim", "run", "--env", "nope"])
        assert result.exit_code != 0
        assert "bandit-imbalanced" in result.output


class TestScenario:
    def test_reward_tuning_scenario(self, runner):
        result = runner.invoke(main, ["scenario", "reward-tuning",
                                      "--seed", "0"])
        assert result.exit_code == 0, result.output
        assert "hypervolume" in result.output
        assert "weights=" in result.output

    def test_policy_sweep_scenario(self, runner):
        result = runner.invoke(main, ["scenario", "policy-sweep",
                                      "--seed", "0"])
        assert result.exit_code == 0, result.output
        lines = [l for l in result.output.splitlines() if l.startswith("theta")]
        assert len(lines) == 6

    def test_unknown_scenario_rejected(self, runner):
        assert runner.invoke(main, ["scenario", "nope"]).exit_code != 0


class TestHttpCommands:
    def test_commands_fail_cleanly_when_server_down(self, runner):
        # nothing listens on this port; the client should exit non-zero
        result = runner.invoke(main, ["--url", "http://127.0.0.1:9",
                                      "describe", "uc"])
        assert result.exit_code != 0
