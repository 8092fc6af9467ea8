import csv
import json

import numpy as np
import pytest

from neoseize.cli import main
from neoseize.edf import write_edf
from neoseize.synth import synth_recording


@pytest.fixture(scope="module")
def pipeline(small_fixture_dir, tmp_path_factory):
    """ingest -> featurize -> train on the small fixtures."""
    work = tmp_path_factory.mktemp("cli")
    assert main(["ingest", "--data-dir", str(small_fixture_dir), "--window-s", "2",
                 "--out", str(work / "w.nsdw")]) == 0
    assert main(["featurize", "--windows", str(work / "w.nsdw"), "--out", str(work / "f.csv")]) == 0
    cfg = work / "train.cfg"
    cfg.write_text("window_s = 2\nepochs = 20\nn_prototypes = 8\nproj_dim = 5\n")
    assert main(["train", "--config", str(cfg), "--features", str(work / "f.csv"), "--pca-dim", "10",
                 "--out", str(work / "m.nsdm")]) == 0
    return work


def test_feature_dump_schema(pipeline):
    with open(pipeline / "f.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:4] == ["recording_id", "t_start", "label", "f0"]
    assert header[-1] == "f43"


def test_evaluate(pipeline, capsys):
    capsys.readouterr()
    assert main(["evaluate", "--features", str(pipeline / "f.csv"), "--model", str(pipeline / "m.nsdm")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("window_s,pca_dim,accuracy")
    values = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert values["window_s"] == "2" and values["pca_dim"] == "10"
    assert int(values["model_bytes"]) == 4 * (5 * 10 + 5 * 8 + 2 * 8)


def test_train_knn_summary(pipeline):
    out = pipeline / "k.json"
    assert main(["train", "--classifier", "knn", "--features", str(pipeline / "f.csv"),
                 "--pca-dim", "10", "--out", str(out)]) == 0
    summary = json.loads(out.read_text())
    assert summary["classifier"] == "knn" and 1 <= summary["k"] <= 40


def test_evaluate_knn(pipeline, tmp_path):
    out = tmp_path / "row.csv"
    assert main(["evaluate", "--classifier", "knn", "--features", str(pipeline / "f.csv"),
                 "--train-features", str(pipeline / "f.csv"), "--k", "1", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["accuracy"]) == 1.0


def test_predict(pipeline, small_fixture_dir, tmp_path):
    out = tmp_path / "pred.csv"
    edf = sorted(small_fixture_dir.glob("*.edf"))[0]
    assert main(["predict", "--model", str(pipeline / "m.nsdm"), "--edf", str(edf), "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 32
    assert rows[1]["t_start"] == "2" and rows[0]["recording_id"] == edf.stem
    assert {r["label"] for r in rows} <= {"0", "1"}


def test_bench(pipeline, small_fixture_dir, capsys):
    edf = sorted(small_fixture_dir.glob("*.edf"))[0]
    capsys.readouterr()
    assert main(["bench", "--model", str(pipeline / "m.nsdm"), "--edf", str(edf)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["min_ms"] <= report["p50_ms"] <= report["p95_ms"]
    assert report["segments"] == 100


def test_predict_channel_mismatch(pipeline, tmp_path, capsys):
    rec, _ = synth_recording(np.random.default_rng(0), n_channels=3, duration_s=8)
    write_edf(tmp_path / "three.edf", rec)
    code = main(["predict", "--model", str(pipeline / "m.nsdm"), "--edf", str(tmp_path / "three.edf")])
    assert code == 2
    assert "DimensionMismatch" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["grid", "--no-such-flag"]) == 1
    assert "--no-such-flag" in capsys.readouterr().err


def test_missing_command():
    assert main([]) == 1


def test_missing_config(tmp_path):
    assert main(["grid", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_corrupt_model(tmp_path, small_fixture_dir):
    bad = tmp_path / "bad.nsdm"
    bad.write_bytes(b"NOPE" + bytes(20))
    edf = sorted(small_fixture_dir.glob("*.edf"))[0]
    assert main(["predict", "--model", str(bad), "--edf", str(edf)]) == 2


def test_empty_data_dir(tmp_path):
    assert main(["grid", "--data-dir", str(tmp_path), "--output-dir", str(tmp_path / "o")]) == 2


def test_grid_via_config(small_fixture_dir, tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text(f"data_dir = {small_fixture_dir}\noutput_dir = out\nwindows = 1\npca_dims = 10,20\n"
                   "bench_segments = 0\nplots = false\n")
    assert main(["grid", "--config", str(cfg)]) == 0
    assert len((tmp_path / "out" / "protonn_results.csv").read_text().splitlines()) == 3


def test_make_fixtures(tmp_path):
    assert main(["make-fixtures", "--out", str(tmp_path), "--recordings", "2", "--duration-s", "16",
                 "--channels", "3"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["rec01.csv", "rec01.edf", "rec02.csv", "rec02.edf"]
