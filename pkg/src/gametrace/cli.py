"""Command-line entry point orchestrating the full pipeline.

Subcommands: gen-synthetic, aggregate, select, train, cv, evaluate,
benchmark, verify. Every knob lives in one JSON config file; command-line
flags override config values, which override defaults. All output files
embed the config fingerprint, and reruns with identical inputs and seeds
produce identical bytes (runtimes live in separate .run.json sidecars).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .aggregation import StreamingAggregator, load_feature_matrix, save_feature_matrix
from .config import RunConfig, load_config
from .dataset import (
    LabeledDataset,
    SplitPlan,
    export_fold_assignments,
    fit_preprocessor,
    join,
    kfold_indices,
    split_train_test,
)
from .errors import ConfigError, DataError, FingerprintMismatchError, GametraceError, InternalError
from .evaluation import (
    ForestClassifier,
    KnnClassifier,
    MlpClassifier,
    ModelSpec,
    benchmark,
    cross_validate,
    holdout_evaluate,
    majority_baseline_f1,
)
from .events import IngestReport, read_events, read_labels
from .forest import TreeConfig
from .mlp import MlpConfig
from .model_io import load_container, load_model, save_model
from .selection import SelectionPolicy, save_selection_report, select
from .synth import SynthConfig, generate

MODEL_KINDS = ("knn", "mlp", "forest")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this CLI reserves 2 for
    # data errors, so remap usage problems to exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_Usage(message)


class SystemExit_Usage(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="gametrace", description="Gameplay event-log learning pipeline")
    parser.add_argument("--version", action="version", version=f"gametrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON run config")
        p.add_argument("--workdir", type=Path, default=None, help="artifact directory")
        p.add_argument("--events", type=Path, default=None, help="event CSV path")
        p.add_argument("--labels", type=Path, default=None, help="label CSV path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None, help="parallelism cap (recorded)")

    p = sub.add_parser("gen-synthetic", help="generate a seeded synthetic corpus")
    common(p)
    p.add_argument("--sessions", type=int, default=None)
    p.add_argument("--events-per-session", type=int, default=None)

    p = sub.add_parser("aggregate", help="aggregate events into per-group features")
    common(p)

    p = sub.add_parser("select", help="score and select features")
    common(p)

    p = sub.add_parser("train", help="train one model on the holdout train side")
    common(p)
    p.add_argument("--model", choices=MODEL_KINDS, required=True)

    p = sub.add_parser("cv", help="cross-validate one model")
    common(p)
    p.add_argument("--model", choices=MODEL_KINDS, required=True)

    p = sub.add_parser("evaluate", help="evaluate a trained container on the holdout test side")
    common(p)
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--model-file", type=Path, default=None)

    p = sub.add_parser("benchmark", help="run every model under its protocol")
    common(p)
    p.add_argument("--protocol", choices=("cv", "holdout"), default=None)

    p = sub.add_parser("verify", help="check fingerprint consistency of artifacts")
    common(p)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.workdir is not None:
        cfg.workdir = str(args.workdir)
    elif os.environ.get("GAMETRACE_WORKDIR"):
        cfg.workdir = os.environ["GAMETRACE_WORKDIR"]
    if args.events is not None:
        cfg.events_path = str(args.events)
    if args.labels is not None:
        cfg.labels_path = str(args.labels)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "sessions", None) is not None:
        cfg.synth.sessions = args.sessions
    if getattr(args, "events_per_session", None) is not None:
        cfg.synth.events_per_session = args.events_per_session
    if getattr(args, "protocol", None) is not None:
        cfg.protocol = args.protocol
    return cfg


def _workdir(cfg: RunConfig) -> Path:
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _events_path(cfg: RunConfig) -> Path:
    path = Path(cfg.events_path) if cfg.events_path else _workdir(cfg) / "events.csv"
    if not path.exists():
        raise DataError(f"MissingFile: event file not found: {path}")
    return path


def _labels_path(cfg: RunConfig) -> Path:
    path = Path(cfg.labels_path) if cfg.labels_path else _workdir(cfg) / "labels.csv"
    if not path.exists():
        raise DataError(f"MissingFile: label file not found: {path}")
    return path


def _effective_workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as sink:
        json.dump(payload, sink, indent=2, sort_keys=True)
        sink.write("\n")


def _write_run_metadata(path: Path, cfg: RunConfig, runtime: float) -> None:
    # Non-deterministic facts live here, never in the comparable reports.
    _write_json(
        path,
        {
            "config_fingerprint": cfg.fingerprint(),
            "seed": cfg.seed,
            "runtime_seconds": runtime,
            "workers": _effective_workers(cfg),
            "unix_time": time.time(),
        },
    )


def cmd_gen_synthetic(cfg: RunConfig) -> int:
    wd = _workdir(cfg)
    synth_cfg = SynthConfig(
        sessions=cfg.synth.sessions,
        events_per_session=cfg.synth.events_per_session,
        seed=cfg.seed,
        null_rates=dict(cfg.synth.null_rates),
        weights=tuple(cfg.synth.weights),
        bias=cfg.synth.bias,
        noise=cfg.synth.noise,
    )
    result = generate(synth_cfg, wd)
    print(
        f"generated {result.events_written} events across {cfg.synth.sessions} sessions; "
        f"{result.labels_written} labels ({result.positive_labels} positive)"
    )
    print(f"events:   {result.events_path}")
    print(f"labels:   {result.labels_path}")
    print(f"manifest: {result.manifest_path}")
    return EXIT_OK


def cmd_aggregate(cfg: RunConfig) -> int:
    wd = _workdir(cfg)
    events_path = _events_path(cfg)
    report = IngestReport()
    agg = StreamingAggregator(cfg.aggregator_specs)
    with open(events_path, newline="") as source:
        agg.update_all(read_events(source, report=report))
    matrix = agg.finalize()

    features_csv = wd / "features.csv"
    features_meta = wd / "features.meta.json"
    with open(features_csv, "w", newline="") as csv_sink, open(features_meta, "w") as meta_sink:
        save_feature_matrix(
            matrix, csv_sink, meta_sink, config_fingerprint=cfg.fingerprint(), seed=cfg.seed
        )

    out_bytes = features_csv.stat().st_size + features_meta.stat().st_size
    compression = agg.compression_report(
        input_bytes=events_path.stat().st_size, output_bytes=out_bytes
    )
    _write_json(
        wd / "aggregate_report.json",
        {
            "config_fingerprint": cfg.fingerprint(),
            "seed": cfg.seed,
            "input_bytes": compression.input_bytes,
            "output_bytes": compression.output_bytes,
            "rows_in": compression.rows_in,
            "rows_out": compression.rows_out,
            "byte_ratio": compression.byte_ratio,
            "rows_skipped": report.rows_skipped,
            "consistency_violations": report.consistency_violations,
        },
    )
    print(f"aggregated: {compression.describe()}")
    if report.rows_skipped:
        print(f"skipped {report.rows_skipped} malformed row(s)", file=sys.stderr)
    print(f"features: {features_csv}")
    return EXIT_OK


def _load_joined(cfg: RunConfig) -> tuple[LabeledDataset, int]:
    wd = _workdir(cfg)
    features_csv = wd / "features.csv"
    features_meta = wd / "features.meta.json"
    if not features_csv.exists() or not features_meta.exists():
        raise DataError(f"MissingFile: run `gametrace aggregate` first (no {features_csv})")
    matrix = load_feature_matrix(features_csv, features_meta)
    with open(_labels_path(cfg), newline="") as source:
        labels = read_labels(source)
    return join(matrix, labels, cfg.question_groups)


def cmd_select(cfg: RunConfig) -> int:
    from .dataset import impute_mean

    wd = _workdir(cfg)
    ds, dropped = _load_joined(cfg)
    x, _ = impute_mean(ds.x, feature_names=ds.feature_names)
    policy = SelectionPolicy(
        relevance_rank_k=min(cfg.selection.k, len(ds.feature_names)),
        redundancy_threshold=cfg.selection.redundancy_threshold,
        mandatory_drops=tuple(cfg.selection.mandatory_drops),
        mi_bins=cfg.selection.mi_bins,
        mi_unit=cfg.selection.mi_unit,
    )
    report = select(x, ds.feature_names, ds.y, policy, categorical_names=ds.categorical_names)
    out = wd / "selection_report.tsv"
    with open(out, "w") as sink:
        save_selection_report(report, sink, config_fingerprint=cfg.fingerprint(), seed=cfg.seed)
    print(f"selected {len(report.selected)} feature(s): {', '.join(report.selected)}")
    if dropped:
        print(f"dropped {dropped} label(s) without feature rows", file=sys.stderr)
    print(f"report: {out}")
    return EXIT_OK


def _split_plan(cfg: RunConfig, folds: int) -> SplitPlan:
    return SplitPlan(
        seed=cfg.seed,
        test_fraction=cfg.split.test_fraction,
        fold_count=folds,
        grouping=cfg.split.grouping,
    )


def _model_spec(cfg: RunConfig, kind: str) -> ModelSpec:
    if kind == "knn":
        return ModelSpec(
            "knn",
            lambda: KnnClassifier(k=cfg.knn.k, metric=cfg.knn.metric),
            cfg.knn.folds,
            cfg.knn.scale,
        )
    if kind == "mlp":
        mlp_cfg = MlpConfig(
            input_dim=1,  # reset at fit time to the preprocessed width
            hidden_sizes=tuple(cfg.mlp.hidden_sizes),
            output_dim=cfg.mlp.output_dim,
            epochs=cfg.mlp.epochs,
            learning_rate=cfg.mlp.learning_rate,
            batch_size=cfg.mlp.batch_size,
            seed=cfg.seed,
            hidden_activation=cfg.mlp.hidden_activation,
        )
        return ModelSpec("mlp", lambda: MlpClassifier(mlp_cfg), cfg.mlp.folds, cfg.mlp.scale)
    if kind == "forest":
        tree_cfg = TreeConfig(
            criterion=cfg.forest.criterion,
            max_depth=cfg.forest.max_depth,
            min_samples_split=cfg.forest.min_samples_split,
            feature_subsample=cfg.forest.feature_subsample,
            seed=cfg.seed,
        )
        return ModelSpec(
            "forest",
            lambda: ForestClassifier(tree_count=cfg.forest.trees, config=tree_cfg, seed=cfg.seed),
            cfg.forest.folds,
            cfg.forest.scale,
        )
    raise ConfigError(f"unknown model kind {kind!r}")


def cmd_train(cfg: RunConfig, kind: str) -> int:
    wd = _workdir(cfg)
    ds, _ = _load_joined(cfg)
    spec = _model_spec(cfg, kind)
    train, _test = split_train_test(ds, _split_plan(cfg, spec.fold_count))
    pre = fit_preprocessor(train.x, train.feature_names, train.categorical_names, scale=spec.scale)
    model = spec.factory()
    model.fit(pre.transform(train.x), train.y)
    out = wd / f"model_{kind}.bin"
    save_model(
        out,
        kind,
        model._model,
        pre,
        train.feature_names,
        config_fingerprint=cfg.fingerprint(),
        seed=cfg.seed,
    )
    print(f"trained {kind} on {len(train)} rows; container: {out}")
    return EXIT_OK


def cmd_cv(cfg: RunConfig, kind: str) -> int:
    wd = _workdir(cfg)
    ds, _ = _load_joined(cfg)
    spec = _model_spec(cfg, kind)
    plan = _split_plan(cfg, spec.fold_count)
    started = time.perf_counter()
    report = cross_validate(
        spec.factory, ds, plan, scale=spec.scale, model_name=kind,
        config_fingerprint=cfg.fingerprint(),
    )
    payload = report.to_dict()
    payload["seed"] = cfg.seed
    _write_json(wd / f"cv_{kind}.json", payload)
    _write_run_metadata(wd / f"cv_{kind}.run.json", cfg, time.perf_counter() - started)
    with open(wd / f"folds_{kind}.tsv", "w") as sink:
        export_fold_assignments(ds, kfold_indices(ds, plan), sink)
    for fr in report.folds:
        print(f"fold {fr.fold}: f1={fr.f1:.4f} accuracy={fr.accuracy:.4f}")
    print(f"{kind} cv-{spec.fold_count}: mean f1={report.mean_f1:.4f} accuracy={report.mean_accuracy:.4f}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, kind: str, model_file: Optional[Path]) -> int:
    wd = _workdir(cfg)
    path = model_file or wd / f"model_{kind}.bin"
    if not path.exists():
        raise DataError(f"MissingFile: model container not found: {path}")
    loaded = load_model(path)
    if loaded.kind != kind:
        raise DataError(f"container holds a {loaded.kind} model, not {kind}")
    if loaded.header.get("config_fingerprint") not in ("", cfg.fingerprint()):
        print("warning: container fingerprint differs from current config", file=sys.stderr)
    ds, _ = _load_joined(cfg)
    spec = _model_spec(cfg, kind)
    _train, test = split_train_test(ds, _split_plan(cfg, spec.fold_count))
    started = time.perf_counter()
    pred = loaded.predict(test.x)
    from .evaluation import FoldResult, accuracy, confusion_counts, f1

    result = FoldResult(0, f1(pred, test.y), accuracy(pred, test.y), confusion_counts(pred, test.y))
    payload = {
        "model": kind,
        "protocol": f"holdout-{cfg.split.test_fraction:g}",
        "seed": cfg.seed,
        "f1": result.f1,
        "accuracy": result.accuracy,
        "confusion": {
            "tp": result.confusion.tp,
            "fp": result.confusion.fp,
            "tn": result.confusion.tn,
            "fn": result.confusion.fn,
        },
        "config_fingerprint": cfg.fingerprint(),
        "model_fingerprint": loaded.header.get("config_fingerprint", ""),
    }
    _write_json(wd / f"eval_{kind}.json", payload)
    _write_run_metadata(wd / f"eval_{kind}.run.json", cfg, time.perf_counter() - started)
    print(f"{kind} holdout: f1={result.f1:.4f} accuracy={result.accuracy:.4f} on {len(test)} rows")
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    wd = _workdir(cfg)
    ds, _ = _load_joined(cfg)
    specs = [_model_spec(cfg, kind) for kind in MODEL_KINDS]
    started = time.perf_counter()
    result = benchmark(
        specs,
        ds,
        seed=cfg.seed,
        grouping=cfg.split.grouping,
        protocol=cfg.protocol,
        test_fraction=cfg.split.test_fraction,
        config_fingerprint=cfg.fingerprint(),
    )
    payload = result.to_dict()
    payload["seed"] = cfg.seed
    payload["config"] = cfg.fingerprint_payload()
    payload["majority_baseline_f1"] = majority_baseline_f1(ds.y)
    _write_json(wd / "benchmark_report.json", payload)
    _write_run_metadata(wd / "benchmark_run.json", cfg, time.perf_counter() - started)
    print(result.render())
    print(f"report: {wd / 'benchmark_report.json'}")
    return EXIT_OK


def _artifact_fingerprints(wd: Path) -> dict[str, str]:
    found: dict[str, str] = {}
    for name in ("features.meta.json", "aggregate_report.json", "benchmark_report.json"):
        path = wd / name
        if path.exists():
            found[name] = json.loads(path.read_text()).get("config_fingerprint", "")
    for path in sorted(wd.glob("cv_*.json")) + sorted(wd.glob("eval_*.json")):
        if path.name.endswith(".run.json"):
            continue
        found[path.name] = json.loads(path.read_text()).get("config_fingerprint", "")
    tsv = wd / "selection_report.tsv"
    if tsv.exists():
        first = tsv.read_text().splitlines()[0]
        found[tsv.name] = first.removeprefix("# config_fingerprint=")
    for path in sorted(wd.glob("model_*.bin")):
        header, _ = load_container(path)
        found[path.name] = header.get("config_fingerprint", "")
    return found


def cmd_verify(cfg: RunConfig) -> int:
    wd = _workdir(cfg)
    expected = cfg.fingerprint()
    found = _artifact_fingerprints(wd)
    if not found:
        raise DataError(f"no fingerprinted artifacts found in {wd}")
    bad = {name: fp for name, fp in found.items() if fp != expected}
    for name, fp in sorted(found.items()):
        status = "ok" if fp == expected else "MISMATCH"
        print(f"{status:<9} {name}  {fp[:16]}")
    print(f"expected  config fingerprint {expected[:16]}")
    if bad:
        raise FingerprintMismatchError(f"{len(bad)} artifact(s) do not match the current config")
    print(f"verified {len(found)} artifact(s)")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit_Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _resolve_config(args)
        if args.command == "gen-synthetic":
            return cmd_gen_synthetic(cfg)
        if args.command == "aggregate":
            return cmd_aggregate(cfg)
        if args.command == "select":
            return cmd_select(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.model)
        if args.command == "cv":
            return cmd_cv(cfg, args.model)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.model, args.model_file)
        if args.command == "benchmark":
            return cmd_benchmark(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except GametraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # unexpected bug: treat as invariant violation
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
