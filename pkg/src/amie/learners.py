"""Trained probability models: from-scratch logistic regression and random
forest behind one interface, plus accuracy and permutation importance.

A probability model is anything with ``predict_many(X) -> P(Y=1 | row)``
(values in [0, 1]), ``predict(row)``, ``feature_count`` and a ``kind``
tag; the exact-inference oracle in :mod:`amie.synth` satisfies the same
interface.  Training is a pure function of (data, params, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, runtime_checkable

import numpy as np

from .dataset import Dataset


class TrainingError(ValueError):
    """Unusable training data or a diverged fit."""


@runtime_checkable
class ProbModel(Protocol):
    kind: str
    feature_count: int

    def predict_many(self, X: np.ndarray) -> np.ndarray: ...

    def predict(self, row) -> float: ...


@dataclass(frozen=True)
class LogRegParams:
    l2_penalty: float = 1e-4
    learning_rate: float = 0.1
    max_epochs: int = 2000
    grad_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("l2_penalty", "learning_rate", "max_epochs", "grad_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    features_per_split: Optional[int] = None  # default: ceil(sqrt(m))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tree_count <= 0 or self.min_leaf <= 0:
            raise ValueError("tree_count and min_leaf must be positive")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.features_per_split is not None and self.features_per_split <= 0:
            raise ValueError("features_per_split must be positive")


class LogisticModel:
    kind = "logreg"

    def __init__(self, weights: np.ndarray, bias: float, converged: bool,
                 params: LogRegParams):
        self.weights = weights
        self.bias = bias
        self.converged = converged
        self.params = params
        self.feature_count = weights.size

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=np.float64) @ self.weights + self.bias
        return _sigmoid(z)

    def predict(self, row) -> float:
        return float(self.predict_many(np.asarray(row)[None, :])[0])

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "bias": float(self.bias),
            "coefficients": [float(w) for w in self.weights],
            "converged": bool(self.converged),
        }


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_trainable(data: Dataset) -> None:
    if data.row_count < 2:
        raise TrainingError("need at least two training rows")
    if len(np.unique(data.outcome)) < 2:
        raise TrainingError("training data holds a single outcome class")


def fit_logreg(train: Dataset, params: LogRegParams = LogRegParams()) -> LogisticModel:
    """Full-batch gradient descent on the L2-penalised mean log loss.

    The bias is not penalised.  Stops when the gradient's infinity norm
    falls below ``grad_tolerance`` or after ``max_epochs``.
    """
    _check_trainable(train)
    X = train.features.astype(np.float64)
    y = train.outcome.astype(np.float64)
    n, m = X.shape
    w = np.zeros(m)
    b = 0.0
    converged = False
    for _ in range(params.max_epochs):
        p = _sigmoid(X @ w + b)
        err = p - y
        grad_w = X.T @ err / n + params.l2_penalty * w
        grad_b = float(err.mean())
        if not np.isfinite(grad_w).all() or not np.isfinite(grad_b):
            raise TrainingError("non-finite loss gradient during training")
        if max(np.abs(grad_w).max(initial=0.0), abs(grad_b)) <= params.grad_tolerance:
            converged = True
            break
        w -= params.learning_rate * grad_w
        b -= params.learning_rate * grad_b
    return LogisticModel(weights=w, bias=b, converged=converged, params=params)


class _FlatTree:
    """A CART tree as flat arrays for batch prediction.

    ``feature[k] == -1`` marks a leaf; internal nodes send rows with
    ``x[feature] <= threshold`` left.  Leaves store the positive-class
    proportion of their training rows.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def finalize(self) -> None:
        self.feature = np.asarray(self.feature, dtype=np.int64)  # type: ignore
        self.threshold = np.asarray(self.threshold, dtype=np.int64)  # type: ignore
        self.left = np.asarray(self.left, dtype=np.int64)  # type: ignore
        self.right = np.asarray(self.right, dtype=np.int64)  # type: ignore
        self.value = np.asarray(self.value, dtype=np.float64)  # type: ignore

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            goes_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(
                goes_left, self.left[node[rows]], self.right[node[rows]]
            )
        return self.value[node]


def _gini_best_split(x: np.ndarray, y: np.ndarray, card: int, min_leaf: int):
    """Best threshold for one integer column; returns (impurity, threshold)."""
    counts = np.bincount(x, minlength=card).astype(np.float64)
    pos = np.bincount(x, weights=y, minlength=card)
    n_left = np.cumsum(counts)[:-1]
    p_left = np.cumsum(pos)[:-1]
    n_total = counts.sum()
    p_total = pos.sum()
    n_right = n_total - n_left
    p_right = p_total - p_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(invalid="ignore", divide="ignore"):
        gini_left = 1.0 - (p_left / n_left) ** 2 - (1.0 - p_left / n_left) ** 2
        gini_right = (
            1.0 - (p_right / n_right) ** 2 - (1.0 - p_right / n_right) ** 2
        )
        weighted = (n_left * gini_left + n_right * gini_right) / n_total
    weighted[~valid] = np.inf
    best = int(np.argmin(weighted))
    return float(weighted[best]), best


def _best_binary_candidate(
    X: np.ndarray, idx: np.ndarray, y_node: np.ndarray, candidates: np.ndarray,
    pos_total: float, min_leaf: int,
):
    """Vectorised split search across candidates when they are all binary."""
    sub = X[idx][:, candidates]
    size = idx.size
    n_right = sub.sum(axis=0).astype(np.float64)  # rows with value 1
    p_right = (sub * y_node[:, None]).sum(axis=0)
    n_left = size - n_right
    p_left = pos_total - p_right
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(invalid="ignore", divide="ignore"):
        gini_left = 1.0 - (p_left / n_left) ** 2 - (1.0 - p_left / n_left) ** 2
        gini_right = (
            1.0 - (p_right / n_right) ** 2 - (1.0 - p_right / n_right) ** 2
        )
        weighted = (n_left * gini_left + n_right * gini_right) / size
    weighted[~valid] = np.inf
    best = int(np.argmin(weighted))
    return float(weighted[best]), int(candidates[best]), 0


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    cards: tuple[int, ...],
    params: ForestParams,
    k_features: int,
    rng: np.random.Generator,
) -> _FlatTree:
    tree = _FlatTree()
    root = tree.add_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    m = X.shape[1]
    all_binary = all(c == 2 for c in cards)
    while stack:
        node, idx, depth = stack.pop()
        y_node = y[idx]
        pos = float(y_node.sum())
        size = idx.size
        tree.value[node] = pos / size
        if (
            depth >= params.max_depth
            or size < 2 * params.min_leaf
            or pos == 0.0
            or pos == size
        ):
            continue
        candidates = rng.choice(m, size=k_features, replace=False)
        if all_binary:
            best = _best_binary_candidate(
                X, idx, y_node, candidates, pos, params.min_leaf
            )
        else:
            best = None
            for f in candidates:
                found = _gini_best_split(
                    X[idx, f], y_node, cards[f], params.min_leaf
                )
                if found is None:
                    continue
                impurity, threshold = found
                if best is None or impurity < best[0]:
                    best = (impurity, int(f), threshold)
        if best is None:
            continue
        _, f, threshold = best
        goes_left = X[idx, f] <= threshold
        left = tree.add_node()
        right = tree.add_node()
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, idx[goes_left], depth + 1))
        stack.append((right, idx[~goes_left], depth + 1))
    tree.finalize()
    return tree


class ForestModel:
    kind = "rf"

    def __init__(self, trees: list[_FlatTree], params: ForestParams,
                 feature_count: int):
        self.trees = trees
        self.params = params
        self.feature_count = feature_count

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_many(X)
        return acc / len(self.trees)

    def predict(self, row) -> float:
        return float(self.predict_many(np.asarray(row)[None, :])[0])

    def summary(self) -> dict:
        depths = []
        for tree in self.trees:
            # leaf depth = path length from the root in the flat layout
            depth = np.zeros(len(tree.feature), dtype=np.int64)
            for k in range(len(tree.feature)):
                if tree.feature[k] >= 0:
                    depth[tree.left[k]] = depth[k] + 1
                    depth[tree.right[k]] = depth[k] + 1
            depths.append(int(depth.max(initial=0)))
        return {
            "kind": self.kind,
            "tree_count": len(self.trees),
            "max_depth_seen": max(depths) if depths else 0,
            "mean_depth": float(np.mean(depths)) if depths else 0.0,
        }


def fit_forest(train: Dataset, params: ForestParams = ForestParams()) -> ForestModel:
    """Bagged CART trees, Gini criterion, random feature subsets per node,
    leaves storing class proportions; the prediction is the mean of the
    per-tree leaf proportions."""
    _check_trainable(train)
    X = train.features
    y = train.outcome.astype(np.float64)
    n, m = X.shape
    k_features = params.features_per_split or int(np.ceil(np.sqrt(m)))
    if k_features > m:
        raise TrainingError("features_per_split exceeds the feature count")
    seeds = np.random.SeedSequence(params.seed).spawn(params.tree_count)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(
            _grow_tree(X[idx], y[idx], train.cards, params, k_features, rng)
        )
    return ForestModel(trees=trees, params=params, feature_count=m)


def accuracy(model: ProbModel, data: Dataset) -> float:
    """Fraction of rows where thresholding the predicted probability at 0.5
    (ties to class 1) matches the outcome."""
    if data.row_count == 0:
        raise ValueError("accuracy needs at least one row")
    predicted = model.predict_many(data.features) >= 0.5
    return float((predicted == (data.outcome == 1)).mean())


def permutation_importance(
    model: ProbModel, data: Dataset, repeats: int = 5, seed: int = 0
) -> np.ndarray:
    """Mean accuracy drop over independent within-column shuffles."""
    if repeats <= 0:
        raise ValueError("repeats must be positive")
    if data.row_count == 0:
        raise ValueError("permutation importance needs data rows")
    base = accuracy(model, data)
    scores = np.zeros(data.feature_count)
    seeds = np.random.SeedSequence(seed).spawn(data.feature_count)
    for j in range(data.feature_count):
        rng = np.random.default_rng(seeds[j])
        drops = 0.0
        for _ in range(repeats):
            shuffled = data.features.copy()
            shuffled[:, j] = shuffled[rng.permutation(data.row_count), j]
            predicted = model.predict_many(shuffled) >= 0.5
            drops += base - float((predicted == (data.outcome == 1)).mean())
        scores[j] = drops / repeats
    return scores
