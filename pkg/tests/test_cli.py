import csv
import json

import pytest

from selfgnn.cli import main
from selfgnn.data import save_interactions
from selfgnn.synthetic import clustered_log

SMALL = ["--T", "2", "--batch", "5", "--max-seq", "10", "--epochs", "2", "--dsal", "4"]


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "log.csv"
    save_interactions(clustered_log(seed=0), path)
    return path


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.json"
    path.write_text(json.dumps({"d": 8, "n_heads": 2, "n_sal": 6, "lambda1": 0.1}))
    return path


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("argv", [["bogus"], ["train", "--frobnicate"], ["train", "--epochs", "many"]])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        run(*argv)
    assert exc.value.code == 2


def test_bad_config_values_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert run("train", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_evaluate_without_checkpoint(tmp_path, data_file, capsys):
    out = tmp_path / "eval"
    assert run("evaluate", "--data", data_file, "--out", out) == 1
    assert "checkpoint not found" in capsys.readouterr().err
    assert (out / "config.json").exists()  # echoed before any work


def test_train_is_reproducible_and_evaluates(tmp_path, data_file, config_file):
    digest = []
    before = data_file.read_bytes()
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("train", "--config", config_file, "--data", data_file, "--out", out, *SMALL) == 0
        digest.append((out / "last.ckpt").read_bytes())
    assert digest[0] == digest[1]
    assert data_file.read_bytes() == before

    with (tmp_path / "a" / "history.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "l_rec", "l_sal", "l_reg", "total", "lr", "val_hr10", "val_ndcg10"]
    assert len(rows) == 3

    out = tmp_path / "a"
    assert run("evaluate", "--data", data_file, "--out", out, "--checkpoint", out / "best.ckpt") == 0
    report = json.loads((out / "report.json").read_text())
    assert report["n_users"] == 20 and "hr10" in report["metrics"]


def test_echoed_config_reproduces_run(tmp_path, data_file, config_file):
    first = tmp_path / "first"
    assert run("train", "--config", config_file, "--data", data_file, "--out", first, *SMALL, "--seed", "3") == 0
    echoed = json.loads((first / "config.json").read_text())
    assert echoed["seed"] == 3 and echoed["n_periods"] == 2 and echoed["d"] == 8
    second = tmp_path / "second"
    assert run("train", "--config", first / "config.json", "--out", second) == 0
    assert (first / "last.ckpt").read_bytes() == (second / "last.ckpt").read_bytes()


def test_prepare_writes_manifest(tmp_path, data_file):
    out = tmp_path / "prep"
    assert run("prepare", "--data", data_file, "--out", out, "--T", "4") == 0
    assert len(json.loads((out / "intervals.json").read_text())["periods"]) == 4
    assert len(json.loads((out / "split.json").read_text())["test_users"]) == 20


def test_experiment_commands(tmp_path, data_file, config_file):
    cfg = json.loads(config_file.read_text())
    cfg["ratios"] = [0.0, 0.1]
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    common = ["--config", path, "--data", data_file, *SMALL]
    assert run("ablate", *common, "--out", tmp_path / "abl", "--variants", "full,-SAL") == 0
    assert {p.name for p in (tmp_path / "abl").glob("ablate_*.json")} == {"ablate_full.json", "ablate_SAL.json"}
    assert run("noise-test", *common, "--out", tmp_path / "noise") == 0
    assert json.loads((tmp_path / "noise" / "noise_0p10.json").read_text())["noise_ratio"] == 0.1
    assert run("sparsity", *common, "--out", tmp_path / "sp", "--cohorts", "9") == 0
    labels = [c["cohort"] for c in json.loads((tmp_path / "sp" / "sparsity.json").read_text())["cohorts"]]
    assert labels == ["0-9", "9+"]
    assert run("case-study", *common, "--out", tmp_path / "cs", "--noise-ratio", "0.15") == 0
    stats = json.loads((tmp_path / "cs" / "case_study.json").read_text())
    assert {"with_sal", "without_sal", "n_flagged", "short_term_likelihood"} <= set(stats)


@pytest.mark.slow
def test_gradcheck_passes_on_fresh_init(tmp_path, capsys):
    assert run("gradcheck", "--out", tmp_path) == 0
    groups = json.loads((tmp_path / "gradcheck.json").read_text())["groups"]
    assert groups and all(g["passed"] for g in groups)
    assert "short" in capsys.readouterr().out
