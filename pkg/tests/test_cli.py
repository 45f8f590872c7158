"""Command-line surface: artifacts, exit codes, manifests, idempotence."""
import json
import time

import numpy as np
import pytest

from threatprobe import cli
from threatprobe.ccpomdp import load_policy
from threatprobe.evaluation import read_metrics_csv
from threatprobe.learner import load_model
from threatprobe.learner.nets import flatten_params

FAST_CONFIG = {
    "train_epochs": 300,
    "warmup_transitions": 100,
    "adversary_epochs": 120,
    "eval_episodes": 60,
    "adversary_seeds": 2,
    "belief_grid_size": 101,
}


@pytest.fixture()
def cfg_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(FAST_CONFIG))
    return str(path)


@pytest.fixture()
def trained_model(tmp_path, cfg_path):
    out = tmp_path / "agent.model"
    assert cli.main(["train-agent", "--config", cfg_path, "--seed", "0",
                     "--out", str(out)]) == 0
    return out


@pytest.fixture()
def solved_policy(tmp_path, cfg_path):
    out = tmp_path / "cc.policy"
    assert cli.main(["solve-ccpomdp", "--config", cfg_path, "--out", str(out)]) == 0
    return out


class TestTrainAgentCommand:
    def test_model_roundtrips_bit_identical(self, trained_model):
        net, meta = load_model(trained_model)
        assert meta["kind"] == "maxent-agent"
        raw = trained_model.read_text()
        from threatprobe.learner.model_io import dump_model
        assert dump_model(net, {k: v for k, v in meta.items() if k != "sigma"}) == raw

    def test_manifest_written(self, trained_model, cfg_path):
        manifest = json.loads((trained_model.parent / "agent.model.manifest.json").read_text())
        from threatprobe.config import config_hash, load_config
        assert manifest["config_hash"] == config_hash(load_config(cfg_path))
        assert manifest["seeds"] == [0]
        assert str(trained_model) in manifest["outputs"]

    def test_idempotent_given_seed(self, tmp_path, cfg_path):
        a = tmp_path / "a.model"
        b = tmp_path / "b.model"
        cli.main(["train-agent", "--config", cfg_path, "--seed", "5", "--out", str(a)])
        cli.main(["train-agent", "--config", cfg_path, "--seed", "5", "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_invalid_sigma_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"sigma": 0}))
        rc = cli.main(["train-agent", "--config", str(bad),
                       "--out", str(tmp_path / "x.model")])
        assert rc == cli.EXIT_CONFIG

    def test_divergence_exit_code(self, tmp_path):
        bad = tmp_path / "diverge.json"
        bad.write_text(json.dumps({**FAST_CONFIG, "train_epochs": 2000,
                                   "warmup_transitions": 50,
                                   "learning_rate": 1e80}))
        with np.errstate(all="ignore"):
            rc = cli.main(["train-agent", "--config", str(bad),
                           "--out", str(tmp_path / "x.model")])
        assert rc == cli.EXIT_DIVERGED

    def test_unwritable_output_is_io_error(self, cfg_path, tmp_path):
        rc = cli.main(["train-agent", "--config", cfg_path,
                       "--out", str(tmp_path / "missing_dir" / "x.model")])
        assert rc == cli.EXIT_IO


class TestSolveCommand:
    def test_policy_reloads_identically(self, solved_policy):
        grid, meta = load_policy(solved_policy)
        assert grid.actions.shape[2] == 101
        assert "config_hash" in meta

    def test_idempotent(self, tmp_path, cfg_path):
        a = tmp_path / "a.policy"
        b = tmp_path / "b.policy"
        cli.main(["solve-ccpomdp", "--config", cfg_path, "--out", str(a)])
        cli.main(["solve-ccpomdp", "--config", cfg_path, "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_default_solve_under_ten_seconds(self, tmp_path):
        start = time.monotonic()
        rc = cli.main(["solve-ccpomdp", "--out", str(tmp_path / "full.policy")])
        elapsed = time.monotonic() - start
        assert rc == 0
        print(f"\ndefault solve took {elapsed:.2f}s")
        assert elapsed < 10.0

    def test_degenerate_equals_nominal_dp(self, tmp_path):
        cfg = tmp_path / "degen.json"
        cfg.write_text(json.dumps({"cc_epsilon": 0.5, "cc_variance": 0.0,
                                   "belief_grid_size": 101}))
        cfg2 = tmp_path / "degen2.json"
        cfg2.write_text(json.dumps({"cc_variance": 0.0, "belief_grid_size": 101}))
        a = tmp_path / "a.policy"
        b = tmp_path / "b.policy"
        cli.main(["solve-ccpomdp", "--config", str(cfg), "--out", str(a)])
        cli.main(["solve-ccpomdp", "--config", str(cfg2), "--out", str(b)])
        ga, _ = load_policy(a)
        gb, _ = load_policy(b)
        assert np.array_equal(ga.actions, gb.actions)


class TestEvaluateCommand:
    def test_writes_one_row(self, tmp_path, cfg_path, trained_model):
        out = tmp_path / "row.csv"
        rc = cli.main(["evaluate", str(trained_model), "--config", cfg_path,
                       "--adversary", "deceptive:0.25", "--episodes", "50",
                       "--seeds", "0,1", "--out", str(out)])
        assert rc == 0
        rows = read_metrics_csv(out)
        assert len(rows) == 1
        assert 0.0 <= rows[0].tpr_mean <= 1.0
        assert rows[0].seeds == (0, 1)
        assert rows[0].agent.startswith("maxent:")

    def test_cc_agent_loads_too(self, tmp_path, cfg_path, solved_policy):
        out = tmp_path / "cc_row.csv"
        rc = cli.main(["evaluate", str(solved_policy), "--config", cfg_path,
                       "--adversary", "generative:1.5,1.5", "--episodes", "40",
                       "--seeds", "0", "--out", str(out)])
        assert rc == 0
        assert read_metrics_csv(out)[0].agent.startswith("ccpomdp:")

    def test_bad_spec_exits_config(self, tmp_path, cfg_path, trained_model):
        rc = cli.main(["evaluate", str(trained_model), "--config", cfg_path,
                       "--adversary", "deceptive:0.9", "--out",
                       str(tmp_path / "x.csv")])
        assert rc == cli.EXIT_CONFIG

    def test_missing_agent_file(self, tmp_path, cfg_path):
        rc = cli.main(["evaluate", str(tmp_path / "nope.model"), "--config",
                       cfg_path, "--adversary", "neutral", "--out",
                       str(tmp_path / "x.csv")])
        assert rc == cli.EXIT_CONFIG

    def test_idempotent(self, tmp_path, cfg_path, trained_model):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            cli.main(["evaluate", str(trained_model), "--config", cfg_path,
                      "--adversary", "generative:1.5,1.5", "--episodes", "40",
                      "--seeds", "3", "--out", str(out)])
        assert a.read_text() == b.read_text()


class TestSweepCommand:
    def test_two_agents_bthre_row_count(self, tmp_path, cfg_path, trained_model,
                                        solved_policy):
        out = tmp_path / "sweep.csv"
        rc = cli.main(["sweep", str(trained_model), str(solved_policy),
                       "--config", cfg_path, "--mode", "bthre",
                       "--out", str(out)])
        assert rc == 0
        rows = read_metrics_csv(out)
        assert len(rows) == 42  # 21 grid values x 2 agents
        agents = {r.agent for r in rows}
        assert len(agents) == 2

    def test_unknown_mode_via_argparse(self, tmp_path, trained_model):
        with pytest.raises(SystemExit) as exc_info:
            cli.main(["sweep", str(trained_model), "--mode", "zeta",
                      "--out", str(tmp_path / "x.csv")])
        assert exc_info.value.code == 2


class TestReportCommand:
    @pytest.fixture()
    def sweep_csv(self, tmp_path, cfg_path, trained_model, solved_policy):
        out = tmp_path / "sweep.csv"
        cli.main(["sweep", str(trained_model), str(solved_policy),
                  "--config", cfg_path, "--mode", "bthre", "--out", str(out)])
        return out

    def test_emits_four_files(self, tmp_path, sweep_csv):
        out_dir = tmp_path / "report"
        rc = cli.main(["report", "--in", str(sweep_csv), "--out-dir", str(out_dir)])
        assert rc == 0
        names = {p.name for p in out_dir.glob("*.csv")}
        assert names == {"clap_vs_eta.csv", "tpr_vs_eta.csv", "tpr_vs_bthre.csv",
                         "diff_vs_up.csv"}

    def test_difference_points_match_hand_computation(self, tmp_path, sweep_csv):
        out_dir = tmp_path / "report"
        cli.main(["report", "--in", str(sweep_csv), "--out-dir", str(out_dir)])
        rows = read_metrics_csv(sweep_csv)
        diff_lines = (out_dir / "diff_vs_up.csv").read_text().splitlines()[1:]
        assert len(diff_lines) == 21
        # hand-check three grid points
        by_key = {}
        for r in rows:
            by_key.setdefault(r.param_value, {})[r.agent.split(":")[0]] = r
        for line in diff_lines[:3]:
            parts = line.split(",")
            value = float(parts[2])
            pair = by_key[value]
            expected = pair["maxent"].tpr_mean - pair["ccpomdp"].tpr_mean
            assert abs(float(parts[4]) - expected) < 1e-12

    def test_empty_csv_errors_without_writing(self, tmp_path):
        empty = tmp_path / "empty.csv"
        from threatprobe.evaluation import metrics_to_csv
        empty.write_text(metrics_to_csv([]))
        out_dir = tmp_path / "nothing"
        rc = cli.main(["report", "--in", str(empty), "--out-dir", str(out_dir)])
        assert rc == cli.EXIT_CONFIG
        assert not out_dir.exists() or not list(out_dir.glob("*.csv"))

    def test_schema_violation_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        rc = cli.main(["report", "--in", str(bad), "--out-dir",
                       str(tmp_path / "r")])
        assert rc == cli.EXIT_CONFIG


class TestVersionFlag:
    def test_version_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            cli.main(["--version"])
        assert exc_info.value.code == 0
