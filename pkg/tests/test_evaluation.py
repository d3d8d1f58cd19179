import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gametrace.dataset import LabeledDataset, SplitPlan
from gametrace.errors import ConfigError, LengthMismatchError
from gametrace.evaluation import (
    REFERENCE_ROWS,
    ConfusionCounts,
    ForestClassifier,
    KnnClassifier,
    MlpClassifier,
    ModelSpec,
    accuracy,
    benchmark,
    confusion_counts,
    cross_validate,
    f1,
    holdout_evaluate,
    macro_f1,
    majority_baseline_f1,
)
from gametrace.mlp import MlpConfig


def test_accuracy_all_correct():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0


def test_accuracy_all_wrong():
    assert accuracy([1, 1, 1], [0, 0, 0]) == 0.0


def test_accuracy_three_of_four():
    assert accuracy([1, 1, 0, 0], [1, 1, 1, 0]) == 0.75


def test_accuracy_length_mismatch():
    with pytest.raises(LengthMismatchError):
        accuracy([1], [1, 0])
    with pytest.raises(LengthMismatchError):
        accuracy([], [])


def test_f1_perfect():
    assert f1([1, 0, 1], [1, 0, 1]) == 1.0


def test_f1_no_positive_predictions_is_zero():
    assert f1([0, 0, 0], [1, 1, 0]) == 0.0


def test_f1_formula_case():
    # tp=3, fp=1, fn=2: precision 0.75, recall 0.6
    pred = [1, 1, 1, 1, 0, 0, 0]
    truth = [1, 1, 1, 0, 1, 1, 0]
    assert f1(pred, truth) == pytest.approx(0.6667, abs=1e-4)


def test_confusion_counts_sum_to_total():
    pred = [1, 0, 1, 1, 0]
    truth = [1, 1, 0, 1, 0]
    c = confusion_counts(pred, truth)
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)
    assert c.total == 5


def test_accuracy_complement_property():
    rng = np.random.default_rng(0)
    pred = rng.integers(0, 2, size=50)
    truth = rng.integers(0, 2, size=50)
    assert accuracy(pred, truth) == pytest.approx(1.0 - accuracy(1 - pred, truth))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_f1_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    pred = rng.integers(0, 2, size=n)
    truth = rng.integers(0, 2, size=n)
    order = rng.permutation(n)
    assert f1(pred, truth) == f1(pred[order], truth[order])


def test_macro_f1_averages_both_classes():
    pred = [1, 1, 0, 0]
    truth = [1, 0, 1, 0]
    want = 0.5 * (f1(pred, truth, 1) + f1(pred, truth, 0))
    assert macro_f1(pred, truth) == pytest.approx(want)


def test_majority_baseline_f1_analytic():
    y = np.array([1] * 70 + [0] * 30)
    p = 0.7
    assert majority_baseline_f1(y) == pytest.approx(2 * p / (1 + p), abs=1e-12)
    assert majority_baseline_f1(np.array([0] * 60 + [1] * 40)) == 0.0


class ConstantModel:
    def __init__(self, label=1):
        self.label = label

    def fit(self, x, y):
        pass

    def predict(self, x):
        return np.full(x.shape[0], self.label, dtype=np.int64)


def balanced_dataset(n=100, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (n // 2))
    x = rng.normal(size=(n, 3)) + y[:, None] * 3.0
    keys = [(f"s{i}", 1 + i % 18) for i in range(n)]
    return LabeledDataset(feature_names=("a", "b", "c"), x=x, y=y, row_keys=keys)


def test_cross_validate_constant_model_on_balanced_data():
    ds = balanced_dataset(100)
    plan = SplitPlan(seed=1, fold_count=5, grouping="by_row")
    report = cross_validate(lambda: ConstantModel(1), ds, plan, scale=False, model_name="const")
    assert report.mean_accuracy == pytest.approx(0.5, abs=0.1)
    assert report.protocol == "cv-5"
    assert len(report.folds) == 5


def test_mean_metrics_equal_fold_average():
    ds = balanced_dataset(60, seed=3)
    plan = SplitPlan(seed=2, fold_count=5, grouping="by_row")
    report = cross_validate(lambda: KnnClassifier(k=3), ds, plan, model_name="knn")
    assert report.mean_f1 == pytest.approx(np.mean([fr.f1 for fr in report.folds]), abs=1e-12)
    assert report.mean_accuracy == pytest.approx(
        np.mean([fr.accuracy for fr in report.folds]), abs=1e-12
    )
    assert report.confusion_total.total == len(ds)


def test_cross_validate_knn_on_separable_data():
    ds = balanced_dataset(120, seed=4)  # class-shifted blobs, duplicate-free
    plan = SplitPlan(seed=3, fold_count=5, grouping="by_row")
    report = cross_validate(lambda: KnnClassifier(k=1), ds, plan, model_name="knn")
    assert report.mean_accuracy >= 0.9


def test_cross_validate_annotates_fold_errors():
    ds = balanced_dataset(20)

    class Exploding:
        def fit(self, x, y):
            raise ValueError("boom")

        def predict(self, x):
            return np.zeros(x.shape[0])

    plan = SplitPlan(seed=1, fold_count=4, grouping="by_row")
    with pytest.raises(ValueError, match="fold 0"):
        cross_validate(lambda: Exploding(), ds, plan)


def test_holdout_evaluate_reports_single_fold():
    ds = balanced_dataset(100, seed=5)
    plan = SplitPlan(seed=4, fold_count=5, grouping="by_row", test_fraction=0.2)
    report = holdout_evaluate(lambda: KnnClassifier(k=3), ds, plan, model_name="knn")
    assert report.protocol == "holdout-0.2"
    assert len(report.folds) == 1
    assert report.confusion_total.total == 20


def test_benchmark_empty_model_list_rejected():
    ds = balanced_dataset(30)
    with pytest.raises(ConfigError):
        benchmark([], ds)


def test_benchmark_table_has_reference_row():
    ds = balanced_dataset(80, seed=6)
    specs = [
        ModelSpec("knn", lambda: KnnClassifier(k=3), 5, True),
        ModelSpec("forest", lambda: ForestClassifier(tree_count=5, seed=1), 5, False),
    ]
    result = benchmark(specs, ds, seed=1, grouping="by_row")
    assert len(result.rows) == len(specs) + 1
    ref = result.rows[-1]
    assert ref.model == "french_touch"
    assert ref.f1 == 0.72
    assert ref.accuracy is None
    assert ref.source == "literature"
    assert REFERENCE_ROWS[0][1] == 0.72


def test_benchmark_models_learn_signal_above_baseline():
    ds = balanced_dataset(160, seed=7)
    mlp_cfg = MlpConfig(input_dim=3, hidden_sizes=(16,), epochs=30, batch_size=32, seed=1)
    specs = [
        ModelSpec("knn", lambda: KnnClassifier(k=3), 5, True),
        ModelSpec("mlp", lambda: MlpClassifier(mlp_cfg), 5, True),
        ModelSpec("forest", lambda: ForestClassifier(tree_count=20, seed=2), 5, False),
    ]
    result = benchmark(specs, ds, seed=2, grouping="by_row")
    base = majority_baseline_f1(ds.y)
    for row in result.rows[:-1]:
        assert row.f1 > base + 0.05


def test_benchmark_respects_per_model_protocols():
    ds = balanced_dataset(100, seed=8)
    specs = [
        ModelSpec("knn", lambda: KnnClassifier(k=3), 10, True),
        ModelSpec("forest", lambda: ForestClassifier(tree_count=3, seed=1), 5, False),
    ]
    result = benchmark(specs, ds, seed=3, grouping="by_row")
    assert result.rows[0].protocol == "cv-10"
    assert result.rows[1].protocol == "cv-5"
    assert len(result.reports[0].folds) == 10
    assert len(result.reports[1].folds) == 5


def test_benchmark_holdout_protocol():
    ds = balanced_dataset(100, seed=9)
    specs = [ModelSpec("knn", lambda: KnnClassifier(k=3), 5, True)]
    result = benchmark(specs, ds, seed=4, grouping="by_row", protocol="holdout")
    assert result.rows[0].protocol == "holdout-0.2"


def test_benchmark_render_and_dict():
    ds = balanced_dataset(50, seed=10)
    specs = [ModelSpec("knn", lambda: KnnClassifier(k=3), 5, True)]
    result = benchmark(specs, ds, seed=5, grouping="by_row", config_fingerprint="fp")
    text = result.render()
    assert "french_touch" in text and "knn" in text
    payload = result.to_dict()
    assert payload["config_fingerprint"] == "fp"
    assert len(payload["rows"]) == 2
    assert payload["reports"][0]["model"] == "knn"
    assert "runtime" not in str(payload["reports"][0].keys())


def test_eval_report_runtime_excluded_from_payload():
    ds = balanced_dataset(40, seed=11)
    plan = SplitPlan(seed=1, fold_count=4, grouping="by_row")
    report = cross_validate(lambda: KnnClassifier(k=1), ds, plan, model_name="knn")
    assert report.runtime_seconds > 0.0
    assert "runtime" not in report.to_dict()


def test_confusion_counts_addition():
    a = ConfusionCounts(1, 2, 3, 4)
    b = ConfusionCounts(10, 20, 30, 40)
    c = a + b
    assert (c.tp, c.fp, c.tn, c.fn) == (11, 22, 33, 44)


def test_cross_validate_one_hot_encodes_code_columns():
    # dictionary-coded column drives the label; per-fold preprocessing must
    # expand it into indicators for the distance model
    rng = np.random.default_rng(12)
    codes = rng.integers(0, 3, size=90).astype(float)
    noise = rng.normal(size=90)
    y = (codes == 1).astype(np.int64)
    ds = LabeledDataset(
        feature_names=("kind_first", "jitter"),
        x=np.column_stack([codes, noise]),
        y=y,
        row_keys=[(f"s{i}", 1 + i % 18) for i in range(90)],
        categorical_names=("kind_first",),
    )
    plan = SplitPlan(seed=2, fold_count=5, grouping="by_row")
    report = cross_validate(lambda: KnnClassifier(k=3), ds, plan, model_name="knn")
    assert report.mean_accuracy >= 0.9
