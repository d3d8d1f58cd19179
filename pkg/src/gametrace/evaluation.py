"""Classification metrics, cross-validation, and the model comparison table.

The positive class is "answered correctly" (label 1). Preprocessing (mean
imputation, optional standardization, one-hot) is re-fit inside every
training fold so no validation statistic leaks into a fit. Fold results are
assembled by fold index, independent of evaluation order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .dataset import LabeledDataset, SplitPlan, fit_preprocessor, kfold, split_train_test
from .errors import ConfigError, LengthMismatchError
from .forest import TreeConfig, forest_fit, forest_predict
from .knn import knn_fit, knn_predict
from .mlp import MlpConfig, mlp_train

# Published literature baseline reported alongside computed results; never
# computed by this pipeline.
REFERENCE_ROWS = (("french_touch", 0.72, None),)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


def _check_lengths(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise LengthMismatchError(p.shape[0] if p.ndim == 1 else -1, t.shape[0] if t.ndim == 1 else -1)
    if p.shape[0] == 0:
        raise LengthMismatchError(0, 0)
    return p, t


def confusion_counts(pred, truth, positive_class: int = 1) -> ConfusionCounts:
    p, t = _check_lengths(pred, truth)
    pos_p = p == positive_class
    pos_t = t == positive_class
    return ConfusionCounts(
        tp=int((pos_p & pos_t).sum()),
        fp=int((pos_p & ~pos_t).sum()),
        tn=int((~pos_p & ~pos_t).sum()),
        fn=int((~pos_p & pos_t).sum()),
    )


def accuracy(pred, truth) -> float:
    p, t = _check_lengths(pred, truth)
    return float((p == t).mean())


def f1(pred, truth, positive_class: int = 1) -> float:
    """Positive-class F1; an undefined precision or recall counts as 0."""
    c = confusion_counts(pred, truth, positive_class)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def macro_f1(pred, truth) -> float:
    """Unweighted mean of per-class F1 over the two classes."""
    return 0.5 * (f1(pred, truth, positive_class=1) + f1(pred, truth, positive_class=0))


def majority_baseline_f1(y: Sequence[int]) -> float:
    """Positive-class F1 of the constant majority-class predictor."""
    yv = np.asarray(y, dtype=np.int64)
    n1 = int(yv.sum())
    n0 = yv.shape[0] - n1
    if n1 <= n0:
        return 0.0  # majority predictor emits 0: no true positives
    p = n1 / yv.shape[0]
    return 2.0 * p / (1.0 + p)


class Classifier(Protocol):
    def fit(self, x: np.ndarray, y: np.ndarray) -> None: ...
    def predict(self, x: np.ndarray) -> np.ndarray: ...


# Thin adapters giving the three models one fit/predict surface.

class KnnClassifier:
    def __init__(self, k: int = 5, metric: str = "euclidean"):
        self.k = k
        self.metric = metric
        self._model = None

    def fit(self, x, y):
        self._model = knn_fit(x, y, k=self.k, metric=self.metric)

    def predict(self, x):
        return knn_predict(self._model, x)


class MlpClassifier:
    def __init__(self, config: MlpConfig):
        self.config = config
        self._model = None

    def fit(self, x, y):
        cfg = self.config
        if cfg.input_dim != x.shape[1]:
            cfg = replace(cfg, input_dim=x.shape[1])
        self._model = mlp_train(cfg, (x, y))

    def predict(self, x):
        return self._model.predict(x)


class ForestClassifier:
    def __init__(self, tree_count: int = 100, config: TreeConfig = TreeConfig(feature_subsample="sqrt"), seed: int = 42):
        self.tree_count = tree_count
        self.config = config
        self.seed = seed
        self._model = None

    def fit(self, x, y):
        self._model = forest_fit(x, y, tree_count=self.tree_count, config=self.config, seed=self.seed)

    def predict(self, x):
        return forest_predict(self._model, x)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    f1: float
    accuracy: float
    confusion: ConfusionCounts


@dataclass
class EvalReport:
    model_name: str
    protocol: str  # e.g. "cv-5", "holdout-0.2"
    folds: list[FoldResult]
    mean_f1: float
    mean_accuracy: float
    confusion_total: ConfusionCounts
    config_fingerprint: str = ""
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        """Deterministic payload; runtime is deliberately excluded so that
        reruns with the same seeds serialize byte-identically."""
        def conf(c: ConfusionCounts) -> dict:
            return {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn}

        return {
            "model": self.model_name,
            "protocol": self.protocol,
            "folds": [
                {"fold": f.fold, "f1": f.f1, "accuracy": f.accuracy, "confusion": conf(f.confusion)}
                for f in self.folds
            ],
            "mean_f1": self.mean_f1,
            "mean_accuracy": self.mean_accuracy,
            "confusion_total": conf(self.confusion_total),
            "config_fingerprint": self.config_fingerprint,
        }


def _assemble_report(
    model_name: str,
    protocol: str,
    folds: list[FoldResult],
    fingerprint: str,
    runtime: float,
) -> EvalReport:
    total = folds[0].confusion
    for fr in folds[1:]:
        total = total + fr.confusion
    return EvalReport(
        model_name=model_name,
        protocol=protocol,
        folds=folds,
        mean_f1=float(np.mean([fr.f1 for fr in folds])),
        mean_accuracy=float(np.mean([fr.accuracy for fr in folds])),
        confusion_total=total,
        config_fingerprint=fingerprint,
        runtime_seconds=runtime,
    )


def cross_validate(
    model_factory: Callable[[], Classifier],
    dataset: LabeledDataset,
    plan: SplitPlan,
    scale: bool = True,
    model_name: str = "model",
    config_fingerprint: str = "",
) -> EvalReport:
    """k-fold evaluation with per-fold preprocessing re-fit."""
    started = time.perf_counter()
    results: list[FoldResult] = []
    for i, (train, val) in enumerate(kfold(dataset, plan)):
        pre = fit_preprocessor(train.x, train.feature_names, train.categorical_names, scale=scale)
        model = model_factory()
        try:
            model.fit(pre.transform(train.x), train.y)
            pred = model.predict(pre.transform(val.x))
        except Exception as exc:
            raise type(exc)(f"fold {i}: {exc}") from exc
        results.append(
            FoldResult(i, f1(pred, val.y), accuracy(pred, val.y), confusion_counts(pred, val.y))
        )
    return _assemble_report(
        model_name,
        f"cv-{plan.fold_count}",
        results,
        config_fingerprint,
        time.perf_counter() - started,
    )


def holdout_evaluate(
    model_factory: Callable[[], Classifier],
    dataset: LabeledDataset,
    plan: SplitPlan,
    scale: bool = True,
    model_name: str = "model",
    config_fingerprint: str = "",
) -> EvalReport:
    """Single train/test evaluation under the plan's holdout fraction."""
    started = time.perf_counter()
    train, test = split_train_test(dataset, plan)
    pre = fit_preprocessor(train.x, train.feature_names, train.categorical_names, scale=scale)
    model = model_factory()
    model.fit(pre.transform(train.x), train.y)
    pred = model.predict(pre.transform(test.x))
    result = FoldResult(0, f1(pred, test.y), accuracy(pred, test.y), confusion_counts(pred, test.y))
    return _assemble_report(
        model_name,
        f"holdout-{plan.test_fraction:g}",
        [result],
        config_fingerprint,
        time.perf_counter() - started,
    )


@dataclass(frozen=True)
class ModelSpec:
    """One benchmark entry: a factory plus its evaluation protocol."""

    name: str
    factory: Callable[[], Classifier]
    fold_count: int
    scale: bool


@dataclass
class BenchmarkRow:
    model: str
    f1: Optional[float]
    accuracy: Optional[float]
    source: str  # "computed" or "literature"
    protocol: str


@dataclass
class BenchmarkResult:
    rows: list[BenchmarkRow]
    reports: list[EvalReport] = field(default_factory=list)
    config_fingerprint: str = ""

    def render(self) -> str:
        header = f"{'model':<16}{'f1':>8}{'accuracy':>10}  {'protocol':<14}{'source'}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            f1s = f"{r.f1:.4f}" if r.f1 is not None else "n/a"
            acc = f"{r.accuracy:.4f}" if r.accuracy is not None else "n/a"
            lines.append(f"{r.model:<16}{f1s:>8}{acc:>10}  {r.protocol:<14}{r.source}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "model": r.model,
                    "f1": r.f1,
                    "accuracy": r.accuracy,
                    "source": r.source,
                    "protocol": r.protocol,
                }
                for r in self.rows
            ],
            "reports": [rep.to_dict() for rep in self.reports],
            "config_fingerprint": self.config_fingerprint,
        }


def benchmark(
    models: Sequence[ModelSpec],
    dataset: LabeledDataset,
    seed: int = 42,
    grouping: str = "by_session",
    protocol: str = "cv",
    test_fraction: float = 0.2,
    config_fingerprint: str = "",
) -> BenchmarkResult:
    """Evaluate every model under its own fold count, plus the reference row."""
    if not models:
        raise ConfigError("benchmark requires at least one model spec")
    if protocol not in ("cv", "holdout"):
        raise ConfigError(f"unknown protocol {protocol!r}")
    rows: list[BenchmarkRow] = []
    reports: list[EvalReport] = []
    for spec in models:
        plan = SplitPlan(
            seed=seed,
            test_fraction=test_fraction,
            fold_count=spec.fold_count,
            grouping=grouping,
        )
        if protocol == "cv":
            report = cross_validate(
                spec.factory, dataset, plan, scale=spec.scale,
                model_name=spec.name, config_fingerprint=config_fingerprint,
            )
        else:
            report = holdout_evaluate(
                spec.factory, dataset, plan, scale=spec.scale,
                model_name=spec.name, config_fingerprint=config_fingerprint,
            )
        reports.append(report)
        rows.append(
            BenchmarkRow(spec.name, report.mean_f1, report.mean_accuracy, "computed", report.protocol)
        )
    for name, ref_f1, ref_acc in REFERENCE_ROWS:
        rows.append(BenchmarkRow(name, ref_f1, ref_acc, "literature", "reported"))
    return BenchmarkResult(rows=rows, reports=reports, config_fingerprint=config_fingerprint)
