import json

import pytest

from ergodicrl import cli
from ergodicrl.envs import read_trajectory_csv


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    code = cli.main([*args, "--out", str(d)])
    return code, d


def test_fig1_writes_ten_trajectories(tmp_path):
    code, d = run(tmp_path, "simulate", "--preset", "fig1")
    assert code == cli.EXIT_OK
    files = sorted((d / "trajectories").glob("*.csv"))
    assert len(files) == 10
    t = read_trajectory_csv(files[0])
    assert t.horizon == 1000 and t.returns[0] == 100.0


def test_single_step_two_rows(tmp_path):
    code, d = run(tmp_path, "simulate", "--override", "horizon=1")
    assert code == 0
    (f,) = (d / "trajectories").glob("*.csv")
    assert len(f.read_text().splitlines()) == 3


def test_provenance_written(tmp_path):
    _, d = run(tmp_path, "simulate", "--override", "horizon=5", "--seed", "7")
    cfg = json.loads((d / "config.json").read_text())
    prov = json.loads((d / "provenance.json").read_text())
    assert cfg["seeds"] == [7] and prov["seeds"] == [7]
    assert prov["version"]


def test_rerun_from_written_config_is_identical(tmp_path):
    _, d1 = run(tmp_path, "simulate", "--override", "horizon=20", "--override", "n_trajectories=3", out="a")
    code, d2 = run(tmp_path, "simulate", "--config", str(d1 / "config.json"), out="b")
    assert code == 0
    for f in (d1 / "trajectories").glob("*.csv"):
        assert f.read_bytes() == (d2 / "trajectories" / f.name).read_bytes()


def test_seed_shifts_preset_list():
    cfg = cli.resolve_config("train", "fig4a", seed=10)
    assert cfg["seeds"] == [10, 11, 12, 13, 14]


def test_gbm_simulation(tmp_path):
    code, d = run(tmp_path, "simulate", "--override", 'env={"kind":"gbm"}', "--override", "n_trajectories=2")
    assert code == 0
    assert len(list((d / "trajectories").glob("*.csv"))) == 2


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--override", "horizon=0"],
        ["simulate", "--override", "bogus=1"],
        ["simulate", "--override", "noequals"],
        ["simulate", "--override", "env.kind=moon"],
        ["train", "--override", "train.discount=2"],
        ["train", "--preset", "fig1"],
        ["diagnose"],
        ["simulate", "--override", 'env={"kind":"cartpole"}'],
    ],
)
def test_config_errors(tmp_path, args, capsys):
    code, _ = run(tmp_path, *args)
    assert code == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_unknown_preset_lists_presets(tmp_path, capsys):
    code, _ = run(tmp_path, "train", "--preset", "nope")
    assert code == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "fig4a" in err and "kelly" in err


def test_malformed_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _ = run(tmp_path, "diagnose", "--config", str(bad))
    assert code == cli.EXIT_CONFIG


def test_learn_transform_coin(tmp_path):
    code, d = run(tmp_path, "learn-transform", "--preset", "coin-transform")
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["checks"]["log_recovery"]["passed"]
    assert (d / "transform.json").exists()


def test_learn_transform_from_csv(tmp_path):
    _, d = run(tmp_path, "simulate", "--override", "horizon=3000", out="sim")
    (f,) = (d / "trajectories").glob("*.csv")
    code, d2 = run(tmp_path, "learn-transform", "--override", f'transform.input="{f}"', out="lt")
    assert code == 0 and (d2 / "transform.json").exists()


def test_insufficient_data_is_runtime_error(tmp_path, capsys):
    code, _ = run(tmp_path, "learn-transform", "--override", "horizon=1")
    assert code == cli.EXIT_RUNTIME
    assert "EmptySampleError" in capsys.readouterr().err


def test_identity_diagnostic(tmp_path):
    code, d = run(tmp_path, "diagnose", "--preset", "identity")
    assert code == 0
    rep = json.loads((d / "diagnose_identity.json").read_text())
    assert rep["passed"] and "inputs" in rep and "thresholds" in rep


def test_threshold_failure_exit_code(tmp_path):
    code, _ = run(tmp_path, "diagnose", "--preset", "identity", "--override", "thresholds.identity_variance_ratio=1.0")
    assert code == cli.EXIT_THRESHOLD


def test_witness_with_options(tmp_path):
    code, d = run(tmp_path, "diagnose", "--preset", "witness",
                  "--override", 'options.witness={"n_ensemble": 20000, "t_time": 50000}')
    assert code == 0
    assert json.loads((d / "diagnose_witness.json").read_text())["n_ensemble"] == 20000


def test_bad_diagnostic_option(tmp_path):
    code, _ = run(tmp_path, "diagnose", "--preset", "witness", "--override", 'options.witness={"nope": 1}')
    assert code == cli.EXIT_CONFIG


def test_small_cartpole_training(tmp_path):
    code, d = run(
        tmp_path, "train", "--preset", "fig4a", "--override", "seeds=[0]",
        "--override", "train.training_episodes=3", "--override", "train.test_episodes=2",
    )
    assert code in (cli.EXIT_OK, cli.EXIT_THRESHOLD)
    summary = json.loads((d / "summary.json").read_text())
    assert {r["mode"] for r in summary["runs"]} == {"none", "per-episode"}
    assert (d / "curve_none_seed0.csv").read_text().startswith("episode,raw_return")
    assert json.loads((d / "policy_per-episode_seed0.json").read_text())["config_hash"]


def test_small_coin_toss_training(tmp_path):
    code, d = run(
        tmp_path, "train", "--preset", "fig3", "--override", "train.training_episodes=3",
        "--override", "train.test_episodes=3", "--override", "train.test_episode_length=20",
    )
    assert code in (cli.EXIT_OK, cli.EXIT_THRESHOLD)
    assert (d / "transform.json").exists()
    ev = json.loads((d / "evaluation_static_seed0.json").read_text())
    assert ev["n_episodes"] == 3 and "mean_action" in ev


def test_schema_and_presets_commands(capsys):
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["type"] == "object"
    assert cli.main(["presets"]) == 0
    assert set(json.loads(capsys.readouterr().out)) >= {"fig1", "fig2", "fig3", "fig4a", "sde-check", "kelly"}


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "ergodicrl", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "ergodicrl" in r.stdout
