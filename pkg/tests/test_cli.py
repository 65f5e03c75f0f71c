import json

import numpy as np
import pytest

from steinebm.checkpoint import load_checkpoint
from steinebm.cli import main
from steinebm.data_io import load_dataset_csv
from steinebm.evaluation import CSV_HEADER, test_log_likelihood as heldout_ll

QUICK = {
    "iterations": 40,
    "cadence": 20,
    "dataset": {"kind": "rbm", "d": 3, "hidden": 2, "n_train": 300, "n_test": 100},
    "model": {"kind": "gbrbm", "hidden": 2},
    "generator": {"noise_dim": 3, "hidden_sizes": [8]},
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(QUICK))
    return path


def strip_wall(text):
    return [line.rsplit(",", 1)[0] for line in text.splitlines()]


@pytest.mark.parametrize("cmd", ["train-steincd", "train-cd", "train-ssm", "train-steingan", "train-mix"])
def test_train_writes_run_directory(tmp_path, cfg_path, cmd):
    out = tmp_path / "run"
    assert main([cmd, "--config", str(cfg_path), "--seed", "7", "--out", str(out), "--no-plots"]) == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 3
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["seed"] == 7 and cfg["rng_algorithm"].startswith("numpy.Philox")
    _, _, gen, _ = load_checkpoint(out / "checkpoint.json")
    assert (gen is not None) == (cmd in ("train-steingan", "train-mix"))


def test_train_twice_is_reproducible(tmp_path, cfg_path):
    for name in ("a", "b"):
        assert main(["train-mix", "--config", str(cfg_path), "--seed", "7", "--out", str(tmp_path / name),
                     "--no-plots"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert strip_wall((a / "metrics.csv").read_text()) == strip_wall((b / "metrics.csv").read_text())
    assert (a / "checkpoint.json").read_bytes() == (b / "checkpoint.json").read_bytes()


def test_plot_written(tmp_path, cfg_path):
    assert main(["train-steincd", "--config", str(cfg_path), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "metrics.png").stat().st_size > 0


def test_eval_prints_exact_likelihood(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    main(["train-cd", "--config", str(cfg_path), "--out", str(out), "--no-plots"])
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out / "checkpoint.json"), "--data", str(out / "test.csv")]) == 0
    printed = capsys.readouterr().out.split()
    model, theta, _, _ = load_checkpoint(out / "checkpoint.json")
    expected = heldout_ll(model, theta, load_dataset_csv(out / "test.csv").points)
    assert printed == ["test_ll", repr(expected)]


def test_sample_from_model_and_generator(tmp_path, cfg_path):
    for cmd in ("train-cd", "train-mix"):
        out = tmp_path / cmd
        main([cmd, "--config", str(cfg_path), "--out", str(out), "--no-plots"])
        assert main(["sample", "--checkpoint", str(out / "checkpoint.json"), "--n", "25", "--out",
                     str(out / "s.csv")]) == 0
        pts = load_dataset_csv(out / "s.csv").points
        assert pts.shape == (25, 3) and np.all(np.isfinite(pts))


def test_sweep_creates_one_run_per_value(tmp_path, cfg_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg_path), "--param", "mix_alpha", "--values", "0,0.25,0.5,0.75,1",
                 "--out", str(out), "--iterations", "10"]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["mix_alpha=0.0", "mix_alpha=0.25", "mix_alpha=0.5", "mix_alpha=0.75", "mix_alpha=1.0"]
    assert len((out / "summary.csv").read_text().splitlines()) == 6
    assert (out / "sweep.png").exists()


def test_minibatch_flag(tmp_path, cfg_path):
    out = tmp_path / "r"
    assert main(["train-steincd", "--config", str(cfg_path), "--minibatch", "100", "--out", str(out),
                 "--no-plots"]) == 0
    assert json.loads((out / "config.json").read_text())["minibatch"] == 100


def test_unknown_flag_exits_2(capsys):
    assert main(["train-steincd", "--no-such-flag"]) == 2
    assert "usage" in capsys.readouterr().err


def test_config_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"kind": "gbrbm", "d": 5}, "dataset": {"kind": "rbm", "d": 4}}))
    assert main(["train-steincd", "--config", str(bad), "--out", str(tmp_path / "x")]) == 3
    assert "model.d" in capsys.readouterr().err
    bad.write_text(json.dumps({"mix_alpha": 3}))
    assert main(["train-mix", "--config", str(bad), "--out", str(tmp_path / "x")]) == 3
    assert "mix_alpha" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exits_4(tmp_path, cfg_path, capsys):
    code = main(["train-cd", "--config", str(cfg_path), "--optimizer", "sgd", "--theta-lr", "1e308",
                 "--out", str(tmp_path / "x"), "--no-plots"])
    assert code == 4
    assert "iteration" in capsys.readouterr().err
