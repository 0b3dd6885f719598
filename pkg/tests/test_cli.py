import csv
import json

import pytest

from maxmean import mcts, mse_lab, qlearning
from maxmean.cli import RunConfig, bounds_report, main, resolve_config
from maxmean.instances import InstanceRecipe
from maxmean.seeding import derive_seed

MSE_ARGS = ["mse", "--instance", "kstar", "--K", "50", "--kstar", "25", "--N", "500",
            "--trials", "200", "--seed", "7", "--estimators", "lem,haver"]


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_mse_row_count(tmp_path):
    out = tmp_path / "r.csv"
    assert main(MSE_ARGS + ["--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["estimator"] for r in rows] == ["lem", "haver"]
    assert all(r["trials"] == "200" for r in rows)


def test_golden_mse_equals_library(tmp_path):
    out, ref = tmp_path / "cli.csv", tmp_path / "lib.csv"
    assert main(MSE_ARGS + ["--out", str(out)]) == 0
    family = lambda N: InstanceRecipe(  # noqa: E731
        "kstar", 50, {"N": N, "reward": "bernoulli", "k_star": 25,
                      "mu_top": 0.005, "mu_bot": 0.002}, seed=7).build()
    rows = mse_lab.sweep(family, ["lem", "haver"], "samples_per_arm", [500], 200, 7,
                         experiment="kstar")
    mse_lab.export_csv(rows, ref)
    assert out.read_bytes() == ref.read_bytes()


def test_unknown_estimator(tmp_path, capsys):
    code = main(["mse", "--estimators", "lem,foo", "--seed", "1", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "foo" in capsys.readouterr().err


@pytest.mark.parametrize("argv,key", [
    (["mse", "--seed", "1"], "out"),
    (["mse", "--out", "x.csv"], "seed"),
    (["mse", "--seed", "1", "--out", "/nonexistent/dir/x.csv"], "out"),
    (["mse", "--seed", "1", "--out", "x.csv", "--trials", "0"], "trials"),
    (["mse", "--seed", "1", "--out", "x.csv", "--instance", "zipf"], "instance"),
    (["mcts", "--seed", "1", "--out", "x.csv", "--estimators", "de"], "estimators"),
    (["qlearn", "--seed", "1", "--out", "x.csv", "--lr", "fast"], "lr"),
])
def test_config_errors_name_the_key(argv, key, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert f": {key}:" in capsys.readouterr().err


def test_malformed_json_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["mse", "--config", str(cfg)]) == 2
    assert "config" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "bogus": 3}))
    assert main(["mse", "--config", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_runtime_error_exit_one(tmp_path, capsys):
    # one sample per arm: the double estimator cannot split
    out = tmp_path / "r.csv"
    code = main(["mse", "--instance", "kstar", "--K", "4", "--N", "1", "--trials", "5",
                 "--seed", "1", "--estimators", "de", "--out", str(out)])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_bounds_matches_library(capsys):
    assert main(["bounds", "--instance", "poly", "--alpha", "2", "--K", "50", "--N", "500"]) == 0
    printed = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
    spec = InstanceRecipe("poly", 50, {"alpha": 2.0, "N": 500}).build()
    gs = mse_lab.good_sets(spec.means, 500)
    terms = mse_lab.corollary7_bound(spec.means, 500)
    assert float(printed["gamma"]) == gs.gamma
    assert int(printed["b_star"]) == len(gs.b_star)
    assert int(printed["b_plus"]) == len(gs.b_plus)
    for k, v in terms._asdict().items():
        assert float(printed[k]) == v


def test_dump_config_round_trip(capsys, tmp_path):
    argv = MSE_ARGS + ["--out", str(tmp_path / "r.csv"), "--N", "100,200"]
    assert main(argv + ["--dump-config"]) == 0
    dumped = capsys.readouterr().out
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(dumped)
    again, _ = resolve_config(["mse", "--config", str(cfg_file)])
    original, _ = resolve_config(argv)
    assert again == original
    assert RunConfig.from_dict(json.loads(again.to_json())) == again


def test_flags_override_file(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 3, "trials": 10, "out": "a.csv"}))
    cfg, _ = resolve_config(["mse", "--config", str(cfg_file), "--trials", "20"])
    assert (cfg.seed, cfg.trials) == (3, 20)


def test_jobs_env_default(monkeypatch):
    monkeypatch.setenv("MAXMEAN_JOBS", "3")
    cfg, _ = resolve_config(["bounds"])
    assert cfg.jobs == 3
    cfg, _ = resolve_config(["bounds", "--jobs", "1"])
    assert cfg.jobs == 1


def test_jobs_do_not_change_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["mse", "--instance", "allbest", "--K", "5", "--N", "10,20", "--trials", "50",
            "--seed", "2", "--reward", "gaussian_unit", "--estimators", "ae,mlcb"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_qlearn_golden(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["qlearn", "--trials", "2", "--steps", "50", "--seed", "4",
                 "--estimators", "haver_practical", "--out", str(out)]) == 0
    env = qlearning.GridWorld()
    metrics = [qlearning.run(env, qlearning.QAgent.for_env(env), 50, "haver_practical",
                             derive_seed(4, t)) for t in range(2)]
    qlearning.export_metrics_csv(metrics, tmp_path / "ref.csv")
    assert out.read_bytes() == (tmp_path / "ref.csv").read_bytes()


def test_qlearn_several_estimators_write_one_file_each(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["qlearn", "--trials", "1", "--steps", "20", "--seed", "4",
                 "--estimators", "lem,de", "--out", str(out)]) == 0
    assert len(read_rows(tmp_path / "q.lem.csv")) == 20
    assert len(read_rows(tmp_path / "q.de.csv")) == 20


def test_mcts_golden(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["mcts", "--env", "4x4", "--simulations", "16,32", "--trials", "2",
                 "--seed", "5", "--estimators", "ae,haver", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 8
    env = mcts.FrozenLake.named("4x4")
    for r in rows:
        want = mcts.run_episode(env, int(r["simulations"]), r["estimator"],
                                derive_seed(5, int(r["trial"])))
        assert float(r["total_reward"]) == want


def test_bounds_report_keys():
    cfg, _ = resolve_config(["bounds", "--instance", "kstar", "--K", "50", "--kstar", "25",
                             "--N", "40000", "--reward", "gaussian_unit",
                             "--mu-top", "0", "--mu-bot", "-0.5"])
    rep = bounds_report(cfg)
    assert rep["b_star"] == rep["b_plus"] == 25
    assert set(rep) == {"gamma", "b_star", "b_plus", "head_bias", "log_ratio",
                        "good_variance", "all_variance"}
