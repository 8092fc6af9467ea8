"""Window-length x PCA-dimension experiment grid.

Outputs in ``output_dir``:

* ``protonn_results.csv`` / ``knn_results.csv``: one metric row per cell;
  byte-identical across runs with the same configuration and seed.
* ``latency.csv``: host-dependent per-segment timings, kept separate so the
  metric reports stay reproducible.
* ``model_size.csv`` + ``model_size.png`` and ``inference_time.png``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import knn as knn_mod
from . import pca as pca_mod
from . import protonn
from .bench import bench_inference, cycle_segments, host_info, summarize, time_segments
from .config import as_bool, as_float_list, as_int_list, load_kv
from .container import ModelContainer
from .edf import Recording, read_annotations_csv, read_recording
from .errors import DataError, DimensionMismatch, GridCellError, NoDataFound
from .features import FeatureConfig, FeatureTable, extract_features, feature_table
from .metrics import MetricReport, evaluate
from .preprocess import PreprocessConfig, make_windows, preprocess_recording, preprocess_segment

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["window_s", "pca_dim", "accuracy", "precision0", "precision1", "recall0",
                  "recall1", "f1_0", "f1_1", "auc", "model_bytes"]
KNN_COLUMNS = REPORT_COLUMNS[:2] + ["k"] + REPORT_COLUMNS[2:]
LATENCY_COLUMNS = ["classifier", "window_s", "pca_dim", "mean_ms", "min_ms", "p50_ms", "p95_ms",
                   "segments", "model_bytes"]


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: Path
    output_dir: Path = Path("results")
    windows: tuple[int, ...] = (1, 2, 4, 8, 16)
    pca_dims: tuple[int, ...] = (20, 50, 70, 100)
    classifier: str = "protonn"
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    k_grid: tuple[int, ...] = tuple(range(1, 41))
    bench_segments: int = 100
    plots: bool = True
    preprocess: PreprocessConfig = PreprocessConfig()
    features: FeatureConfig = FeatureConfig()
    protonn: protonn.ProtoNNConfig = protonn.ProtoNNConfig()

    def __post_init__(self):
        if self.classifier not in ("protonn", "knn", "both"):
            raise ValueError(f"classifier must be protonn, knn or both, got {self.classifier!r}")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError(f"split fractions must be three non-negative numbers summing to 1, got {self.split}")
        if not self.windows or not self.pca_dims:
            raise ValueError("windows and pca_dims must be non-empty")
        if self.bench_segments and self.bench_segments < 100:
            raise ValueError("bench_segments must be 0 (off) or at least 100")

    @property
    def classifiers(self) -> tuple[str, ...]:
        return ("protonn", "knn") if self.classifier == "both" else (self.classifier,)

    @classmethod
    def from_mapping(cls, kv: dict[str, str], base_dir: Path | None = None, **overrides) -> "ExperimentConfig":
        base = Path(base_dir) if base_dir is not None else Path(".")

        def path(value):
            p = Path(value)
            return p if p.is_absolute() else base / p

        kwargs: dict = {}
        if "data_dir" in kv:
            kwargs["data_dir"] = path(kv["data_dir"])
        if "output_dir" in kv:
            kwargs["output_dir"] = path(kv["output_dir"])
        if "windows" in kv:
            kwargs["windows"] = tuple(as_int_list(kv["windows"]))
        if "pca_dims" in kv:
            kwargs["pca_dims"] = tuple(as_int_list(kv["pca_dims"]))
        if "classifier" in kv:
            kwargs["classifier"] = kv["classifier"]
        if "split" in kv:
            kwargs["split"] = tuple(as_float_list(kv["split"]))
        if "seed" in kv:
            kwargs["seed"] = int(kv["seed"])
        if "k_grid" in kv:
            kwargs["k_grid"] = tuple(as_int_list(kv["k_grid"]))
        if "bench_segments" in kv:
            kwargs["bench_segments"] = int(kv["bench_segments"])
        if "plots" in kv:
            kwargs["plots"] = as_bool(kv["plots"])
        kwargs["preprocess"] = PreprocessConfig.from_mapping(kv)
        kwargs["features"] = FeatureConfig.from_mapping(kv)
        seed = int(kv.get("seed", 0))
        kwargs["protonn"] = protonn.ProtoNNConfig.from_mapping(kv, seed=seed)
        kwargs.update(overrides)
        if "data_dir" not in kwargs:
            raise ValueError("data_dir is required")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_mapping(load_kv(path), base_dir=path.parent, **overrides)


@dataclass
class GridResult:
    protonn_rows: list[dict] = field(default_factory=list)
    knn_rows: list[dict] = field(default_factory=list)
    latency_rows: list[dict] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


# --- data --------------------------------------------------------------------


@dataclass(frozen=True)
class Subject:
    raw: Recording
    scaled: Recording
    annotations: object


def discover(data_dir) -> list[tuple[Path, Path]]:
    """``(edf, csv)`` pairs in ``data_dir``, sorted by name."""
    data_dir = Path(data_dir)
    edfs = sorted(data_dir.glob("*.edf")) if data_dir.is_dir() else []
    if not edfs:
        raise NoDataFound(f"no .edf recordings in {data_dir}")
    pairs = []
    for edf in edfs:
        ann = edf.with_suffix(".csv")
        if not ann.exists():
            raise NoDataFound(f"annotation CSV {ann.name} missing for {edf.name}")
        pairs.append((edf, ann))
    return pairs


def load_subjects(data_dir, cfg: PreprocessConfig) -> list[Subject]:
    subjects = []
    for edf, ann_path in discover(data_dir):
        raw = read_recording(edf)
        ann = read_annotations_csv(ann_path, int(raw.duration_s))
        for w in ann.warnings:
            logger.warning("%s: %s", ann_path.name, w)
        subjects.append(Subject(raw=raw, scaled=preprocess_recording(raw, cfg), annotations=ann))
    n_ch = {s.raw.n_channels for s in subjects}
    if len(n_ch) != 1:
        raise DimensionMismatch(f"recordings have different channel counts {sorted(n_ch)}")
    fs = {s.raw.fs for s in subjects}
    if len(fs) != 1:
        raise DataError(f"recordings have different sampling rates {sorted(fs)}")
    return subjects


def split_recordings(ids, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> tuple[list[str], list[str], list[str]]:
    """Grouped train/val/test split of recording ids (each non-empty)."""
    ids = sorted(set(ids))
    n = len(ids)
    n_val = max(1, int(round(fractions[1] * n)))
    n_test = max(1, int(round(fractions[2] * n)))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise DataError(f"{n} recordings cannot be split into train/val/test")
    perm = np.random.default_rng(seed).permutation(n)
    chosen = [ids[i] for i in perm]
    return (sorted(chosen[:n_train]), sorted(chosen[n_train:n_train + n_val]),
            sorted(chosen[n_train + n_val:]))


def _select(table: FeatureTable, ids) -> FeatureTable:
    wanted = set(ids)
    return table.subset(np.array([r in wanted for r in table.recording_ids]))


# --- one cell ------------------------------------------------------------------


def _row(window_s: int, d: int, report: MetricReport, model_bytes: int, k: int | None = None) -> dict:
    row = {"window_s": window_s, "pca_dim": d}
    if k is not None:
        row["k"] = k
    row.update({
        "accuracy": report.accuracy,
        "precision0": report.precision[0], "precision1": report.precision[1],
        "recall0": report.recall[0], "recall1": report.recall[1],
        "f1_0": report.f1[0], "f1_1": report.f1[1],
        "auc": report.auc, "model_bytes": model_bytes,
    })
    return row


def train_container(train: FeatureTable, val: FeatureTable, d: int, cfg: ExperimentConfig,
                    n_channels: int, fs_source: float, window_s: int) -> ModelContainer:
    pca = pca_mod.fit(train.X, d)
    model = protonn.train(pca.transform(train.X), train.y, cfg.protonn,
                          X_val=pca.transform(val.X), y_val=val.y)
    return ModelContainer(preprocess=replace(cfg.preprocess, window_s=window_s), features=cfg.features,
                          fs_source=fs_source, n_channels=n_channels, pca=pca, classifier=model)


def _raw_segments(subjects: list[Subject], ids, window_s: int) -> list[np.ndarray]:
    wanted = set(ids)
    out = []
    for s in subjects:
        if s.raw.recording_id not in wanted:
            continue
        step = int(window_s * s.raw.fs)
        for start in range(0, s.raw.n_samples - step + 1, step):
            out.append(np.array(s.raw.data[:, start:start + step]))
    return out


def _knn_infer(model: knn_mod.KnnModel, pca: pca_mod.PcaModel, cfg: PreprocessConfig,
               fcfg: FeatureConfig, fs: float):
    def infer(raw):
        fv = extract_features(preprocess_segment(raw, fs, cfg), fcfg)
        return knn_mod.knn_predict(model, pca.transform(fv.values))
    return infer


def run_grid(cfg: ExperimentConfig) -> GridResult:
    subjects = load_subjects(cfg.data_dir, cfg.preprocess)
    fs_source = subjects[0].raw.fs
    n_channels = subjects[0].raw.n_channels
    train_ids, val_ids, test_ids = split_recordings(
        [s.raw.recording_id for s in subjects], cfg.split, cfg.seed)
    logger.info("split: train=%s val=%s test=%s", train_ids, val_ids, test_ids)

    result = GridResult()
    for w in cfg.windows:
        pcfg = replace(cfg.preprocess, window_s=w)
        windows = []
        for s in subjects:
            windows.extend(make_windows(s.scaled, s.annotations, pcfg, preprocessed=True))
        table = feature_table(windows, cfg.features)
        train, val, test = (_select(table, ids) for ids in (train_ids, val_ids, test_ids))
        segments = (cycle_segments(_raw_segments(subjects, test_ids, w), cfg.bench_segments)
                    if cfg.bench_segments else [])
        for d in cfg.pca_dims:
            try:
                if "protonn" in cfg.classifiers:
                    container = train_container(train, val, d, cfg, n_channels, fs_source, w)
                    scores = container.score_features(test.X)
                    report = evaluate(protonn.decide(scores), test.y, scores[:, 1])
                    result.protonn_rows.append(_row(w, d, report, container.model_bytes))
                    if segments:
                        bench = bench_inference(container, segments)
                        result.latency_rows.append({"classifier": "protonn", "window_s": w, "pca_dim": d,
                                                    **bench.as_row()})
                if "knn" in cfg.classifiers:
                    pca = pca_mod.fit(train.X, d)
                    Xt, Xv, Xs = (pca.transform(t.X) for t in (train, val, test))
                    k = knn_mod.knn_select_k((Xt, train.y), (Xv, val.y), cfg.k_grid)
                    model = knn_mod.KnnModel(Xt, train.y, k)
                    votes = knn_mod.vote_fraction(model, Xs)
                    report = evaluate((votes >= 0.5).astype(np.int64), test.y, votes)
                    result.knn_rows.append(_row(w, d, report, model.memory_bytes, k=k))
                    if segments:
                        times = time_segments(_knn_infer(model, pca, pcfg, cfg.features, fs_source), segments)
                        bench = summarize(times, model.memory_bytes)
                        result.latency_rows.append({"classifier": "knn", "window_s": w, "pca_dim": d,
                                                    **bench.as_row()})
            except DataError as exc:
                raise GridCellError(w, d, exc) from exc
            logger.info("cell w=%s d=%s done", w, d)

    write_outputs(cfg, result)
    return result


# --- outputs -------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_rows(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def write_outputs(cfg: ExperimentConfig, result: GridResult) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "protonn" in cfg.classifiers:
        write_rows(out / "protonn_results.csv", REPORT_COLUMNS, result.protonn_rows)
        result.files.append(out / "protonn_results.csv")
    if "knn" in cfg.classifiers:
        write_rows(out / "knn_results.csv", KNN_COLUMNS, result.knn_rows)
        result.files.append(out / "knn_results.csv")
    size_rows = [{"classifier": "protonn", "pca_dim": r["pca_dim"], "model_bytes": r["model_bytes"]}
                 for r in result.protonn_rows if r["window_s"] == cfg.windows[0]]
    size_rows += [{"classifier": "knn", "pca_dim": r["pca_dim"], "model_bytes": r["model_bytes"]}
                  for r in result.knn_rows if r["window_s"] == cfg.windows[0]]
    write_rows(out / "model_size.csv", ["classifier", "pca_dim", "model_bytes"], size_rows)
    result.files.append(out / "model_size.csv")
    if result.latency_rows:
        path = out / "latency.csv"
        write_rows(path, LATENCY_COLUMNS, result.latency_rows)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(f"# host: {host_info()}\n")
        result.files.append(path)
    if cfg.plots:
        result.files.extend(plot_results(out, result))


def plot_results(out: Path, result: GridResult) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    files = []
    if result.latency_rows:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for clf in ("protonn", "knn"):
            rows = [r for r in result.latency_rows if r["classifier"] == clf]
            for d in sorted({r["pca_dim"] for r in rows}):
                sel = sorted((r for r in rows if r["pca_dim"] == d), key=lambda r: r["window_s"])
                ax.plot([r["window_s"] for r in sel], [r["mean_ms"] for r in sel], marker="o",
                        label=f"{clf} d={d}")
        ax.set_xlabel("window length (s)")
        ax.set_ylabel("inference time per segment (ms)")
        ax.set_xscale("log", base=2)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / "inference_time.png", dpi=120)
        plt.close(fig)
        files.append(out / "inference_time.png")
    sizes = {}
    for r in result.protonn_rows:
        sizes.setdefault(r["pca_dim"], r["model_bytes"])
    if sizes:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        dims = sorted(sizes)
        ax.plot(dims, [sizes[d] for d in dims], marker="o")
        ax.set_xlabel("number of features (PCA dim)")
        ax.set_ylabel("model size (bytes)")
        fig.tight_layout()
        fig.savefig(out / "model_size.png", dpi=120)
        plt.close(fig)
        files.append(out / "model_size.png")
    return files
