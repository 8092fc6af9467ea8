"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import knn as knn_mod
from . import pca as pca_mod
from . import protonn
from .bench import bench_inference, cycle_segments
from .config import as_int_list, load_kv
from .container import ModelContainer, load_model, save_model
from .edf import read_annotations_csv, read_recording
from .errors import DataError
from .features import FeatureConfig, extract_features, feature_table, read_feature_csv, write_feature_csv
from .grid import ExperimentConfig, _fmt, _row, _select, discover, run_grid, write_rows
from .metrics import evaluate
from .preprocess import PreprocessConfig, make_windows, preprocess_recording, read_windows, segment, write_windows
from .synth import make_fixtures

logger = logging.getLogger("neoseize")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neoseize", description="Neonatal seizure detection pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", type=Path, help="key=value configuration file")
        return p

    p = with_config(sub.add_parser("ingest", help="EDF + annotation CSV -> window dump"))
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data-dir", type=Path, help="directory of NAME.edf + NAME.csv pairs")
    src.add_argument("--edf", type=Path, help="single EDF file (annotations from --annotations)")
    p.add_argument("--annotations", type=Path, help="annotation CSV for --edf")
    p.add_argument("--window-s", type=int)
    p.add_argument("--label-threshold", type=int)
    p.add_argument("--out", type=Path, required=True)

    p = with_config(sub.add_parser("featurize", help="window dump -> feature CSV"))
    p.add_argument("--windows", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = with_config(sub.add_parser("train", help="train a classifier on a feature CSV"))
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--val-features", type=Path, help="validation features (default: grouped split)")
    p.add_argument("--classifier", choices=("protonn", "knn"), default="protonn")
    p.add_argument("--pca-dim", type=int, default=20)
    p.add_argument("--fs-source", type=float, help="raw sampling rate the model will see (default 256)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="model container (protonn) or JSON summary (knn)")

    p = with_config(sub.add_parser("evaluate", help="metrics on a feature CSV"))
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--model", type=Path, help="ProtoNN model container")
    p.add_argument("--classifier", choices=("protonn", "knn"), default="protonn")
    p.add_argument("--train-features", type=Path, help="kNN reference set")
    p.add_argument("--pca-dim", type=int, default=20)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", type=Path, help="write the metric row as CSV")

    p = with_config(sub.add_parser("predict", help="per-window labels for an EDF file"))
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--edf", type=Path, required=True)
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")

    p = with_config(sub.add_parser("bench", help="per-segment inference latency"))
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--edf", type=Path, required=True)
    p.add_argument("--segments", type=int, default=100)

    p = with_config(sub.add_parser("grid", help="window x PCA experiment grid"))
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--classifier", choices=("protonn", "knn", "both"))
    p.add_argument("--seed", type=int)
    p.add_argument("--bench-segments", type=int, help="0 disables latency measurement")

    p = sub.add_parser("make-fixtures", help="write synthetic EDF + annotation fixtures")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--recordings", type=int, default=10)
    p.add_argument("--duration-s", type=int, default=288)
    p.add_argument("--channels", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _kv(args) -> dict[str, str]:
    cfg = getattr(args, "config", None)
    if cfg is None:
        return {}
    if not cfg.exists():
        raise UsageError(f"--config: no such file {cfg}")
    try:
        return load_kv(cfg)
    except ValueError as exc:
        raise UsageError(f"--config {cfg}: {exc}") from None


def _preprocess_cfg(args, kv) -> PreprocessConfig:
    overrides = {}
    if getattr(args, "window_s", None) is not None:
        overrides["window_s"] = args.window_s
    if getattr(args, "label_threshold", None) is not None:
        overrides["label_threshold"] = args.label_threshold
    return PreprocessConfig.from_mapping(kv, **overrides)


def cmd_ingest(args, kv) -> int:
    cfg = _preprocess_cfg(args, kv)
    if args.edf is not None:
        if args.annotations is None:
            raise UsageError("--edf requires --annotations")
        pairs = [(args.edf, args.annotations)]
    else:
        pairs = discover(args.data_dir)
    windows = []
    for edf, ann_path in pairs:
        rec = read_recording(edf)
        ann = read_annotations_csv(ann_path, int(rec.duration_s))
        for w in ann.warnings:
            logger.warning("%s: %s", Path(ann_path).name, w)
        windows.extend(make_windows(rec, ann, cfg))
    write_windows(args.out, windows)
    print(f"{len(windows)} windows -> {args.out}")
    return EXIT_OK


def cmd_featurize(args, kv) -> int:
    table = feature_table(read_windows(args.windows), FeatureConfig.from_mapping(kv))
    write_feature_csv(args.out, table)
    print(f"{len(table)} feature rows ({table.X.shape[1]} features) -> {args.out}")
    return EXIT_OK


def _train_val(args, seed):
    table = read_feature_csv(args.features)
    if args.val_features is not None:
        return table, read_feature_csv(args.val_features)
    ids = sorted(set(table.recording_ids))
    if len(ids) < 2:
        raise DataError("need --val-features or at least two recordings to carve a validation split")
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_val = max(1, int(round(0.25 * len(ids))))
    val_ids = [ids[i] for i in perm[:n_val]]
    train_ids = [ids[i] for i in perm[n_val:]]
    return _select(table, train_ids), _select(table, val_ids)


def cmd_train(args, kv) -> int:
    seed = args.seed if args.seed is not None else int(kv.get("seed", 0))
    train, val = _train_val(args, seed)
    pca = pca_mod.fit(train.X, args.pca_dim)
    if args.classifier == "knn":
        k_grid = as_int_list(kv["k_grid"]) if "k_grid" in kv else list(range(1, 41))
        Xt, Xv = pca.transform(train.X), pca.transform(val.X)
        k = knn_mod.knn_select_k((Xt, train.y), (Xv, val.y), k_grid)
        report = evaluate(knn_mod.knn_predict(knn_mod.KnnModel(Xt, train.y, k), Xv), val.y)
        summary = {"classifier": "knn", "k": k, "pca_dim": args.pca_dim,
                   "val_accuracy": report.accuracy, "val_sensitivity": report.sensitivity}
        print(json.dumps(summary))
        if args.out is not None:
            args.out.write_text(json.dumps(summary, indent=2) + "\n")
        return EXIT_OK
    if args.out is None:
        raise UsageError("train --classifier protonn requires --out")
    if train.X.shape[1] % 11:
        raise DataError(f"{train.X.shape[1]} features is not 11 per channel")
    pcfg = protonn.ProtoNNConfig.from_mapping(kv, seed=seed)
    model = protonn.train(pca.transform(train.X), train.y, pcfg, X_val=pca.transform(val.X), y_val=val.y)
    fs_source = args.fs_source if args.fs_source is not None else float(kv.get("fs_source", 256))
    container = ModelContainer(preprocess=_preprocess_cfg(args, kv), features=FeatureConfig.from_mapping(kv),
                               fs_source=fs_source, n_channels=train.X.shape[1] // 11, pca=pca,
                               classifier=model)
    save_model(container, args.out)
    print(f"model ({container.model_bytes} bytes of parameters) -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args, kv) -> int:
    test = read_feature_csv(args.features)
    if args.classifier == "knn":
        if args.train_features is None:
            raise UsageError("evaluate --classifier knn requires --train-features")
        train = read_feature_csv(args.train_features)
        pca = pca_mod.fit(train.X, args.pca_dim)
        model = knn_mod.KnnModel(pca.transform(train.X), train.y, args.k)
        votes = knn_mod.vote_fraction(model, pca.transform(test.X))
        report = evaluate((votes >= 0.5).astype(np.int64), test.y, votes)
        row = _row(0, args.pca_dim, report, model.memory_bytes, k=args.k)
    else:
        if args.model is None:
            raise UsageError("evaluate --classifier protonn requires --model")
        container = load_model(args.model)
        scores = container.score_features(test.X)
        report = evaluate(protonn.decide(scores), test.y, scores[:, 1])
        row = _row(container.preprocess.window_s, container.pca.n_components, report, container.model_bytes)
    columns = list(row)
    if args.out is not None:
        write_rows(args.out, columns, [row])
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(columns)
        writer.writerow([_fmt(v) for v in row.values()])
    return EXIT_OK


def cmd_predict(args, kv) -> int:
    container = load_model(args.model)
    rec = read_recording(args.edf)
    container.check_channels(rec.n_channels)
    if rec.fs != container.fs_source:
        raise DataError(f"recording is at {rec.fs} Hz, model expects {container.fs_source} Hz")
    scaled = preprocess_recording(rec, container.preprocess)
    windows = segment(scaled, container.preprocess.window_s, container.preprocess.fs_target)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["recording_id", "t_start", "label", "score1"])
        for i, data in enumerate(windows):
            s = container.score_features(extract_features(data, container.features).values)
            writer.writerow([rec.recording_id, i * container.preprocess.window_s, protonn.decide(s),
                             f"{s[1]:.6f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_bench(args, kv) -> int:
    container = load_model(args.model)
    rec = read_recording(args.edf)
    container.check_channels(rec.n_channels)
    step = int(container.preprocess.window_s * rec.fs)
    segs = [np.array(rec.data[:, s:s + step]) for s in range(0, rec.n_samples - step + 1, step)]
    report = bench_inference(container, cycle_segments(segs, args.segments))
    print(json.dumps({**report.as_row(), "window_s": container.preprocess.window_s, "host": report.host}))
    return EXIT_OK


def cmd_grid(args, kv) -> int:
    overrides = {}
    if args.data_dir is not None:
        overrides["data_dir"] = args.data_dir
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.classifier is not None:
        overrides["classifier"] = args.classifier
    if args.bench_segments is not None:
        overrides["bench_segments"] = args.bench_segments
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        base = args.config.parent if args.config is not None else None
        cfg = ExperimentConfig.from_mapping(kv, base_dir=base, **overrides)
        if args.seed is not None:
            cfg = replace(cfg, protonn=replace(cfg.protonn, seed=args.seed))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise UsageError(str(exc)) from None
    result = run_grid(cfg)
    for path in result.files:
        print(path)
    return EXIT_OK


def cmd_make_fixtures(args, kv) -> int:
    paths = make_fixtures(args.out, n_recordings=args.recordings, duration_s=args.duration_s,
                          n_channels=args.channels, seed=args.seed)
    print(f"{len(paths)} recordings -> {args.out}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "featurize": cmd_featurize, "train": cmd_train, "evaluate": cmd_evaluate,
    "predict": cmd_predict, "bench": cmd_bench, "grid": cmd_grid, "make-fixtures": cmd_make_fixtures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        kv = _kv(args)
        return COMMANDS[args.command](args, kv)
    except UsageError as exc:
        print(f"neoseize {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"neoseize {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, UnicodeDecodeError) as exc:
        print(f"neoseize {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid configuration values
        print(f"neoseize {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
