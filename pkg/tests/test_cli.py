import csv
import json

import numpy as np
import pytest

from tagi import cli
from tagi.data import write_idx


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_unknown_config_key_is_rejected(tmp_path):
    cfg = write(tmp_path / "c.json", {"train": {"epochs": 2, "learning_rate": 0.1}})
    assert cli.main(["toy1d", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_bad_config_values(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"arch": {"hidden": [0]}})
    assert cli.main(["toy1d", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["toy1d", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["toy1d", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_dataset_is_a_data_error(tmp_path, monkeypatch):
    monkeypatch.setenv("TAGI_DATA_DIR", str(tmp_path))
    assert cli.main(["regress", "--dataset", "yacht", "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert cli.main(["mnist", "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert cli.main(["regress", "--dataset", "nope", "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_moments_check_passes(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["moments-check", "--samples", "20000", "--cases", "2", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["all_pass"] and len(report["cases"]) == 4
    assert set(report["cases"][0]["checks"]) == {"mean12", "cross_cov", "prod_prod_cov", "var12"}


def test_moments_check_reports_band_failure(tmp_path, monkeypatch):
    wrong = cli.closed_forms
    monkeypatch.setattr(cli, "closed_forms", lambda q: {k: v + 1.0 for k, v in wrong(q).items()})
    assert cli.main(["moments-check", "--samples", "20000", "--cases", "1", "--out", str(tmp_path / "r")]) == 3


def test_toy1d_outputs(tmp_path):
    cfg = write(tmp_path / "c.json", {"train": {"epochs": 4}, "arch": {"hidden": [20]}})
    assert cli.main(["toy1d", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "2"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["seed"] == 2 and summary["config"]["train"]["epochs"] == 4
    assert 1 <= summary["best_epoch"] <= 4
    with open(tmp_path / "o" / "epochs.csv") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["epoch"]) for r in rows] == [0, 1, 2, 3, 4]
    with open(tmp_path / "o" / "predictive.csv") as f:
        curves = list(csv.DictReader(f))
    assert {int(r["epoch"]) for r in curves} >= {0, 1, 4}
    assert all(float(r["lower"]) <= float(r["mean"]) <= float(r["upper"]) for r in curves)


def test_toy1d_prior_band_is_wide(tmp_path):
    cfg = write(tmp_path / "c.json", {"train": {"epochs": 2}})
    cli.main(["toy1d", "--config", str(cfg), "--out", str(tmp_path / "o")])
    with open(tmp_path / "o" / "predictive.csv") as f:
        rows = [r for r in csv.DictReader(f)]
    width = {e: np.mean([float(r["upper"]) - float(r["lower"]) for r in rows if int(r["epoch"]) == e])
             for e in (0, 2)}
    assert width[0] > width[2]


def _tiny_regression(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (40, 2))
    y = x[:, 0] - 2 * x[:, 1] + 0.1 * rng.standard_normal(40)
    path = tmp_path / "tiny.csv"
    np.savetxt(path, np.column_stack([x, y]), delimiter=",", header="a,b,y", comments="")
    return write(tmp_path / "c.json", {
        "arch": {"hidden": [5]},
        "train": {"epochs": 2, "sigma_v_grid": [0.1, 0.5], "cv_folds": 2},
        "data": {"path": str(path), "splits": 2, "test_size": 8},
    })


def test_regress_metrics_are_byte_identical(tmp_path):
    cfg = _tiny_regression(tmp_path)
    for out in ("a", "b"):
        assert cli.main(["regress", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    a = (tmp_path / "a" / "metrics.json").read_bytes()
    assert a == (tmp_path / "b" / "metrics.json").read_bytes()
    m = json.loads(a)
    assert m["folds"] == 2 and len(m["sigma_v"]) == 2 and m["seed"] == 0
    assert "seconds_per_fold" in json.loads((tmp_path / "a" / "timing.json").read_text())


def test_mnist_on_synthetic_idx(tmp_path, monkeypatch):
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 10, 300)
    images = np.zeros((300, 4, 4), dtype=np.uint8)
    images.reshape(300, -1)[np.arange(300), labels] = 255  # one bright pixel per class
    write_idx(tmp_path / "img", tmp_path / "lab", images, labels)
    cfg = write(tmp_path / "c.json", {
        "arch": {"hidden": [20]},
        "data": {"train_images": "img", "train_labels": "lab", "test_size": 100, "checkpoints": [0, 50]},
    })
    monkeypatch.setenv("TAGI_DATA_DIR", str(tmp_path))
    assert cli.main(["mnist", "--config", str(cfg), "--out", str(tmp_path / "o"), "--limit", "150"]) == 0
    m = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert [c["observations"] for c in m["checkpoints"]] == [0, 50, 150]
    assert m["test_error"] < 0.5
    with open(tmp_path / "o" / "decisions.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3 * 12
    for r in rows:
        assert float(r["correct"]) + float(r["incorrect"]) + float(r["unknown"]) == pytest.approx(1.0)
