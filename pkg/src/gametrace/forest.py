"""Decision trees with entropy/Gini splits and a bagged forest ensemble.

Split thresholds sit at midpoints between consecutive distinct sorted
values, so trees are exact and deterministic; ties prefer the lower feature
index, then the lower threshold. The forest draws one bootstrap resample
per tree from a per-tree seed derived from the master seed by tree index,
making the ensemble independent of training order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DimensionMismatchError,
    EmptySetError,
    PartitionMismatchError,
)
from .rng import derive_seed


@dataclass(frozen=True)
class Leaf:
    label: int
    counts: tuple[int, ...]


@dataclass(frozen=True)
class Internal:
    feature: int
    threshold: float  # value <= threshold routes left
    gain: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class TreeConfig:
    criterion: str = "gini"
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    feature_subsample: str = "all"  # "sqrt" for classical forests
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in ("entropy", "gini"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when set")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.feature_subsample not in ("all", "sqrt"):
            raise ConfigError(f"unknown feature_subsample {self.feature_subsample!r}")


def entropy(class_counts: Sequence[int]) -> float:
    """Shannon entropy in bits; 0*log0 taken as 0."""
    counts = [int(c) for c in class_counts]
    if any(c < 0 for c in counts):
        raise DataError("negative class count")
    total = sum(counts)
    if total == 0:
        raise EmptySetError()
    out = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            out -= p * math.log2(p)
    return out


def gini(class_counts: Sequence[int]) -> float:
    """Gini impurity: 1 - sum of squared class probabilities."""
    counts = [int(c) for c in class_counts]
    if any(c < 0 for c in counts):
        raise DataError("negative class count")
    total = sum(counts)
    if total == 0:
        raise EmptySetError()
    return 1.0 - sum((c / total) ** 2 for c in counts)


def _impurity(counts: Sequence[int], criterion: str) -> float:
    return entropy(counts) if criterion == "entropy" else gini(counts)


def information_gain(
    parent_counts: Sequence[int],
    split: Sequence[Sequence[int]],
    criterion: str = "entropy",
) -> float:
    """Parent impurity minus size-weighted child impurity."""
    parent = [int(c) for c in parent_counts]
    children = [[int(c) for c in ch] for ch in split]
    for cls in range(len(parent)):
        if sum(ch[cls] for ch in children) != parent[cls]:
            raise PartitionMismatchError()
    total = sum(parent)
    if total == 0:
        raise EmptySetError()
    weighted = sum(
        (sum(ch) / total) * _impurity(ch, criterion) for ch in children if sum(ch) > 0
    )
    return _impurity(parent, criterion) - weighted


def best_split(
    x: np.ndarray,
    y: np.ndarray,
    config: TreeConfig,
    candidate_features: Optional[Sequence[int]] = None,
) -> Optional[tuple[int, float, float]]:
    """Exhaustive midpoint-threshold scan; None when no split gains.

    Binary labels. Returns (feature, threshold, gain) maximizing gain with
    ties broken by lower feature index then lower threshold.
    """
    found = _scan_split(x, y, config, candidate_features)
    if found is None or found[2] <= 0.0:
        return None
    return found


def _scan_split(
    x: np.ndarray,
    y: np.ndarray,
    config: TreeConfig,
    candidate_features: Optional[Sequence[int]] = None,
) -> Optional[tuple[int, float, float]]:
    """Best (feature, threshold, gain) over all midpoints, zero gain allowed.

    None only when the node is pure or no candidate feature has two
    distinct values. Tree growth uses this directly: impurity criteria are
    concave, so gain is never negative, and splitting through a zero-gain
    plateau (the XOR pattern) is required to reach the pure leaves below.
    """
    n = x.shape[0]
    n1 = int(y.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        return None
    if config.criterion == "gini":
        parent = 1.0 - ((n0 / n) ** 2 + (n1 / n) ** 2)
    else:
        parent = entropy((n0, n1))
    features = range(x.shape[1]) if candidate_features is None else candidate_features

    best: Optional[tuple[int, float, float]] = None
    for f in features:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        cuts = np.nonzero(sv[1:] != sv[:-1])[0]  # split after position i
        if cuts.shape[0] == 0:
            continue
        c1 = np.cumsum(y[order])
        nl = cuts + 1
        nl1 = c1[cuts]
        nl0 = nl - nl1
        nr = n - nl
        nr1 = n1 - nl1
        nr0 = nr - nr1
        if config.criterion == "gini":
            il = 1.0 - ((nl0 / nl) ** 2 + (nl1 / nl) ** 2)
            ir = 1.0 - ((nr0 / nr) ** 2 + (nr1 / nr) ** 2)
        else:
            il = -(_plog2(nl0 / nl) + _plog2(nl1 / nl))
            ir = -(_plog2(nr0 / nr) + _plog2(nr1 / nr))
        gains = parent - ((nl / n) * il + (nr / n) * ir)
        j = int(np.argmax(gains))  # first max: lowest threshold wins in-feature
        gain = float(gains[j])
        if best is None or gain > best[2]:
            thr = (float(sv[cuts[j]]) + float(sv[cuts[j] + 1])) / 2.0
            best = (int(f), thr, gain)
    return best


def _plog2(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    mask = p > 0.0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def _majority(n0: int, n1: int) -> int:
    return 1 if n1 > n0 else 0  # tie -> label 0


def tree_fit(
    x: np.ndarray,
    y: np.ndarray,
    config: TreeConfig = TreeConfig(),
    rng: Optional[np.random.Generator] = None,
) -> TreeNode:
    """Grow one tree; stops at purity, depth, node size, or zero gain."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DataError("tree_fit needs a nonempty matrix with matching labels")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d = x.shape[1]
    if config.feature_subsample == "sqrt":
        n_candidates = max(1, int(math.isqrt(d)))
    else:
        n_candidates = d

    # Explicit stack (deep chains would blow Python's recursion limit).
    # Expansion happens in preorder, so feature-candidate draws are
    # reproducible for a given seed regardless of tree shape.
    tasks: list[tuple] = [("expand", x, y, 0)]
    done: list[TreeNode] = []
    while tasks:
        task = tasks.pop()
        if task[0] == "combine":
            _, f, thr, gain = task
            right = done.pop()
            left = done.pop()
            done.append(Internal(f, thr, gain, left, right))
            continue
        _, xs, ys, depth = task
        n1 = int(ys.sum())
        n0 = ys.shape[0] - n1
        if (
            n0 == 0
            or n1 == 0
            or ys.shape[0] < config.min_samples_split
            or (config.max_depth is not None and depth >= config.max_depth)
        ):
            done.append(Leaf(_majority(n0, n1), (n0, n1)))
            continue
        if n_candidates < d:
            candidates = np.sort(rng.choice(d, size=n_candidates, replace=False))
        else:
            candidates = np.arange(d)
        found = _scan_split(xs, ys, config, candidates)
        if found is None:
            done.append(Leaf(_majority(n0, n1), (n0, n1)))
            continue
        f, thr, gain = found
        mask = xs[:, f] <= thr
        tasks.append(("combine", f, thr, gain))
        tasks.append(("expand", xs[~mask], ys[~mask], depth + 1))
        tasks.append(("expand", xs[mask], ys[mask], depth + 1))
    return done[0]


def tree_predict(node: TreeNode, queries: np.ndarray) -> np.ndarray:
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    out = np.empty(q.shape[0], dtype=np.int64)
    stack: list[tuple[TreeNode, np.ndarray]] = [(node, np.arange(q.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if idx.shape[0] == 0:
            continue
        if isinstance(nd, Leaf):
            out[idx] = nd.label
            continue
        go_left = q[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


def tree_depth(node: TreeNode) -> int:
    deepest = 0
    stack: list[tuple[TreeNode, int]] = [(node, 0)]
    while stack:
        nd, depth = stack.pop()
        if isinstance(nd, Leaf):
            deepest = max(deepest, depth)
        else:
            stack.append((nd.left, depth + 1))
            stack.append((nd.right, depth + 1))
    return deepest


@dataclass
class ForestModel:
    trees: list[TreeNode]
    config: TreeConfig
    seed: int
    bootstrap: bool
    tree_seeds: tuple[int, ...] = ()
    n_features: int = 0

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    def predict(self, queries: np.ndarray) -> np.ndarray:
        return forest_predict(self, queries)


def forest_fit(
    x: np.ndarray,
    y: np.ndarray,
    tree_count: int = 100,
    config: TreeConfig = TreeConfig(feature_subsample="sqrt"),
    seed: int = 42,
    bootstrap: bool = True,
) -> ForestModel:
    """Bagged ensemble; per-tree seeds derive from (seed, tree index)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if tree_count < 1:
        raise ConfigError("tree_count must be >= 1")
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DataError("forest_fit needs a nonempty matrix with matching labels")
    n = x.shape[0]
    trees: list[TreeNode] = []
    seeds: list[int] = []
    for t in range(tree_count):
        tree_seed = derive_seed(seed, t)
        seeds.append(tree_seed)
        rng = np.random.default_rng(tree_seed)
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            xt, yt = x[idx], y[idx]
        else:
            xt, yt = x, y
        trees.append(tree_fit(xt, yt, config, rng=rng))
    return ForestModel(
        trees=trees,
        config=config,
        seed=seed,
        bootstrap=bootstrap,
        tree_seeds=tuple(seeds),
        n_features=x.shape[1],
    )


def forest_predict(model: ForestModel, queries: np.ndarray) -> np.ndarray:
    """Majority vote over trees; ties go to label 0."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    if model.n_features and q.shape[1] != model.n_features:
        raise DimensionMismatchError(model.n_features, q.shape[1])
    votes = np.zeros(q.shape[0], dtype=np.int64)
    for tree in model.trees:
        votes += tree_predict(tree, q)
    return (votes * 2 > len(model.trees)).astype(np.int64)


def feature_importances(model: ForestModel) -> np.ndarray:
    """Total split gain per feature across all trees, normalized to sum 1."""
    totals = np.zeros(model.n_features, dtype=np.float64)
    stack: list[TreeNode] = list(model.trees)
    while stack:
        nd = stack.pop()
        if isinstance(nd, Internal):
            totals[nd.feature] += nd.gain
            stack.append(nd.left)
            stack.append(nd.right)
    s = totals.sum()
    return totals / s if s > 0 else totals
