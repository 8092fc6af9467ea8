import csv

import pytest

from neoseize.errors import GridCellError, NoDataFound
from neoseize.grid import ExperimentConfig, KNN_COLUMNS, REPORT_COLUMNS, discover, run_grid, split_recordings


def small_cfg(data_dir, out, **changes):
    kv = {"windows": "1,2", "pca_dims": "10,20", "classifier": "both", "bench_segments": "0",
          "seed": "0", **changes}
    return ExperimentConfig.from_mapping(kv, data_dir=data_dir, output_dir=out)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_both_classifiers(small_fixture_dir, tmp_path):
    run_grid(small_cfg(small_fixture_dir, tmp_path))
    p = read_rows(tmp_path / "protonn_results.csv")
    k = read_rows(tmp_path / "knn_results.csv")
    assert len(p) == len(k) == 4
    assert list(p[0]) == REPORT_COLUMNS
    assert list(k[0]) == KNN_COLUMNS
    assert [(r["window_s"], r["pca_dim"]) for r in p] == [("1", "10"), ("1", "20"), ("2", "10"), ("2", "20")]
    assert {r["model_bytes"] for r in p if r["pca_dim"] == "20"} == {"1760"}
    for row in p + k:
        for c in ("accuracy", "recall1", "auc"):
            assert 0.0 <= float(row[c]) <= 1.0
    assert (tmp_path / "model_size.png").exists()
    # no timings requested, so no latency table or plot
    assert not (tmp_path / "latency.csv").exists()
    assert not (tmp_path / "inference_time.png").exists()


def test_deterministic_small(small_fixture_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_grid(small_cfg(small_fixture_dir, a, classifier="protonn", plots="false"))
    run_grid(small_cfg(small_fixture_dir, b, classifier="protonn", plots="false"))
    assert (a / "protonn_results.csv").read_bytes() == (b / "protonn_results.csv").read_bytes()


def test_latency_rows(small_fixture_dir, tmp_path):
    run_grid(small_cfg(small_fixture_dir, tmp_path, windows="1", pca_dims="10",
                       bench_segments="100", plots="false"))
    lines = (tmp_path / "latency.csv").read_text().splitlines()
    assert lines[0].startswith("classifier,window_s,pca_dim,mean_ms")
    assert len(lines) == 4 and lines[-1].startswith("# host:")


def test_cell_errors_carry_context(small_fixture_dir, tmp_path):
    # 64 s recordings give too few 16 s windows for 20 prototypes
    with pytest.raises(GridCellError) as exc:
        run_grid(small_cfg(small_fixture_dir, tmp_path, windows="16", classifier="protonn"))
    assert (exc.value.window_s, exc.value.pca_dim) == (16, 10)


def test_empty_data_dir(tmp_path):
    with pytest.raises(NoDataFound):
        discover(tmp_path)


def test_split_grouped_and_seeded():
    ids = [f"r{i}" for i in range(10)]
    train, val, test = split_recordings(ids, (0.6, 0.2, 0.2), seed=3)
    assert (len(train), len(val), len(test)) == (6, 2, 2)
    assert set(train) | set(val) | set(test) == set(ids)
    assert not (set(train) & set(val) or set(train) & set(test) or set(val) & set(test))
    assert split_recordings(ids, seed=3) == (train, val, test)
    assert split_recordings(ids, seed=4) != (train, val, test)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(data_dir=tmp_path, split=(0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        ExperimentConfig(data_dir=tmp_path, windows=())


def test_config_file_paths_relative(tmp_path):
    cfg_file = tmp_path / "sub" / "grid.cfg"
    cfg_file.parent.mkdir()
    cfg_file.write_text("data_dir = data\noutput_dir = ../out\nwindows = 4\nclassifier = knn\n")
    cfg = ExperimentConfig.from_file(cfg_file)
    assert cfg.data_dir == tmp_path / "sub" / "data"
    assert cfg.output_dir == tmp_path / "sub" / ".." / "out"
    assert cfg.windows == (4,) and cfg.classifier == "knn"
