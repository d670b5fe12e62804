"""From-scratch random-forest classifier with deterministic training.

Trees are grown CART-style on bootstrap resamples with Gini impurity, a
per-node random feature subset, and midpoint thresholds.  Every tree's RNG is
derived purely from (master seed, tree index), so serial and parallel training
produce bit-identical models.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, LabelOutOfRange

DEFAULT_N_TREES = 2400


@dataclass(frozen=True)
class ForestParams:
    """Training hyperparameters; defaults follow the project conventions."""

    n_trees: int = DEFAULT_N_TREES
    max_features: "int | str" = "sqrt"
    min_samples_leaf: int = 1
    bootstrap: bool = True
    max_depth: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            m = int(math.floor(math.sqrt(n_features)))
        elif isinstance(self.max_features, int):
            m = self.max_features
        else:
            raise ValueError(f"unknown max_features rule {self.max_features!r}")
        return min(max(1, m), n_features)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "min_samples_leaf": self.min_samples_leaf,
            "bootstrap": self.bootstrap,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls(
            n_trees=int(d["n_trees"]),
            max_features=d["max_features"],
            min_samples_leaf=int(d["min_samples_leaf"]),
            bootstrap=bool(d["bootstrap"]),
            max_depth=None if d["max_depth"] is None else int(d["max_depth"]),
        )


@dataclass(frozen=True)
class TreeNode:
    """Internal split node (feature_index >= 0) or leaf (class_distribution set)."""

    feature_index: int = -1
    threshold: float = 0.0
    left: "Optional[TreeNode]" = None
    right: "Optional[TreeNode]" = None
    class_distribution: Optional[tuple[float, ...]] = None

    @property
    def is_leaf(self) -> bool:
        return self.class_distribution is not None


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    n_features: int
    n_classes: int
    params: ForestParams
    master_seed: int

    def __post_init__(self) -> None:
        if not self.trees:
            raise ValueError("forest must contain at least one tree")


def _leaf(counts: np.ndarray) -> TreeNode:
    dist = counts / counts.sum()
    return TreeNode(class_distribution=tuple(float(p) for p in dist))


def _best_split(
    values: np.ndarray,
    labels: np.ndarray,
    feats: np.ndarray,
    n_classes: int,
    min_leaf: int,
) -> Optional[tuple[int, float]]:
    """Best (feature, threshold) over the given candidate features, or None.

    The score maximized is equivalent to the Gini impurity decrease; ties
    break toward the lowest (feature_index, threshold).
    """
    n = values.shape[0]
    if n < 2 * min_leaf or n < 2:
        return None
    order = np.argsort(values, axis=0)
    xs = np.take_along_axis(values, order, axis=0)
    ys = labels[order]

    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    totals = np.bincount(labels, minlength=n_classes)
    score = np.zeros((n - 1, values.shape[1]))
    for c in range(n_classes):
        left = np.cumsum(ys == c, axis=0, dtype=np.float64)[:-1]
        right = float(totals[c]) - left
        score += left**2 / n_left + right**2 / n_right

    valid = (xs[1:] != xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    score[~valid] = -np.inf
    pos = np.argmax(score, axis=0)
    col_best = score[pos, np.arange(values.shape[1])]
    col = int(np.argmax(col_best))
    if not np.isfinite(col_best[col]):
        return None
    p = int(pos[col])
    lo, hi = xs[p, col], xs[p + 1, col]
    threshold = (lo + hi) / 2.0
    if threshold == hi:  # float midpoint collapsed upward; keep the split valid
        threshold = lo
    return int(feats[col]), float(threshold)


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    depth: int,
    rng: np.random.Generator,
    n_classes: int,
    max_features: int,
    min_leaf: int,
    max_depth: Optional[int],
) -> TreeNode:
    counts = np.bincount(y[idx], minlength=n_classes)
    if counts.max() == len(idx):
        return _leaf(counts)
    if max_depth is not None and depth >= max_depth:
        return _leaf(counts)
    if len(idx) < max(2, 2 * min_leaf):
        return _leaf(counts)

    n_features = X.shape[1]
    feats = np.sort(rng.choice(n_features, size=max_features, replace=False))
    best = _best_split(X[np.ix_(idx, feats)], y[idx], feats, n_classes, min_leaf)
    if best is None and max_features < n_features:
        # Every sampled feature was constant within the node: scan the rest so
        # impure nodes only terminate when the samples are truly unsplittable.
        rest = np.setdiff1d(np.arange(n_features), feats, assume_unique=True)
        best = _best_split(X[np.ix_(idx, rest)], y[idx], rest, n_classes, min_leaf)
    if best is None:
        return _leaf(counts)

    feat, threshold = best
    mask = X[idx, feat] <= threshold
    left_idx, right_idx = idx[mask], idx[~mask]
    if len(left_idx) == 0 or len(right_idx) == 0:
        return _leaf(counts)
    left = _grow(X, y, left_idx, depth + 1, rng, n_classes, max_features, min_leaf, max_depth)
    right = _grow(X, y, right_idx, depth + 1, rng, n_classes, max_features, min_leaf, max_depth)
    return TreeNode(feature_index=feat, threshold=threshold, left=left, right=right)


def _tree_rng(master_seed: int, tree_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(tree_index,))
    return np.random.Generator(np.random.PCG64(seq))


def _train_one_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    master_seed: int,
    tree_index: int,
    n_classes: int,
) -> TreeNode:
    rng = _tree_rng(master_seed, tree_index)
    n = X.shape[0]
    if params.bootstrap:
        idx = rng.integers(0, n, size=n)
    else:
        idx = np.arange(n)
    max_features = params.resolve_max_features(X.shape[1])
    return _grow(
        X, y, idx, 0, rng, n_classes, max_features, params.min_samples_leaf, params.max_depth
    )


_POOL_STATE: dict = {}


def _pool_init(X, y, params, master_seed, n_classes) -> None:
    _POOL_STATE.update(X=X, y=y, params=params, seed=master_seed, n_classes=n_classes)


def _pool_train(tree_index: int) -> TreeNode:
    s = _POOL_STATE
    return _train_one_tree(s["X"], s["y"], s["params"], s["seed"], tree_index, s["n_classes"])


def train_forest(
    X: np.ndarray,
    y: Sequence[int],
    params: Optional[ForestParams] = None,
    seed: int = 0,
    *,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Train a forest; the result is a pure function of (X, y, params, seed)."""
    params = params or ForestParams()
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainingSet("X must be a nonempty (n, d) matrix")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise LabelOutOfRange(f"y must have shape ({X.shape[0]},)")
    if not np.issubdtype(y.dtype, np.integer):
        y_int = y.astype(np.int64)
        if not np.array_equal(y_int, y):
            raise LabelOutOfRange("labels must be integers")
        y = y_int
    y = y.astype(np.int64)
    if (y < 0).any():
        raise LabelOutOfRange("labels must be >= 0")
    inferred = int(y.max()) + 1
    if n_classes is None:
        n_classes = max(2, inferred)
    elif inferred > n_classes:
        raise LabelOutOfRange(f"label {int(y.max())} >= n_classes {n_classes}")
    if seed < 0:
        raise ValueError("seed must be non-negative")

    indices = range(params.n_trees)
    if n_jobs and n_jobs > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            processes=n_jobs,
            initializer=_pool_init,
            initargs=(X, y, params, seed, n_classes),
        ) as pool:
            trees = pool.map(_pool_train, indices)
    else:
        trees = [_train_one_tree(X, y, params, seed, i, n_classes) for i in indices]
    return ForestModel(
        trees=tuple(trees),
        n_features=X.shape[1],
        n_classes=n_classes,
        params=params,
        master_seed=seed,
    )


def _traverse(node: TreeNode, x: np.ndarray) -> tuple[float, ...]:
    while not node.is_leaf:
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.class_distribution  # type: ignore[return-value]


def predict_proba(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Posterior class distribution: mean of leaf distributions across trees."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape}")
    acc = np.zeros(model.n_classes)
    for tree in model.trees:
        acc += _traverse(tree, x)
    return acc / len(model.trees)


def _flatten_tree(root: TreeNode):
    feat: list[int] = []
    thr: list[float] = []
    left: list[int] = []
    right: list[int] = []
    dist: list[tuple[float, ...]] = []

    def visit(node: TreeNode) -> int:
        i = len(feat)
        feat.append(node.feature_index if not node.is_leaf else -1)
        thr.append(node.threshold)
        left.append(-1)
        right.append(-1)
        dist.append(node.class_distribution or ())
        if not node.is_leaf:
            left[i] = visit(node.left)  # type: ignore[arg-type]
            right[i] = visit(node.right)  # type: ignore[arg-type]
        return i

    visit(root)
    n_classes = max((len(d) for d in dist if d), default=0)
    dist_arr = np.zeros((len(dist), n_classes))
    for i, d in enumerate(dist):
        if d:
            dist_arr[i] = d
    return (
        np.array(feat, dtype=np.int64),
        np.array(thr, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        dist_arr,
    )


def predict_proba_matrix(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Batched posteriors, shape (n_samples, n_classes); matches predict_proba."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected (n, {model.n_features}) matrix, got {X.shape}")
    n = X.shape[0]
    acc = np.zeros((n, model.n_classes))
    rows = np.arange(n)
    for tree in model.trees:
        feat, thr, left, right, dist = _flatten_tree(tree)
        node = np.zeros(n, dtype=np.int64)
        active = feat[node] >= 0
        while active.any():
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, feat[cur]] <= thr[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            active[idx] = feat[node[idx]] >= 0
        acc += dist[node]
    return acc / len(model.trees)


# --- persistence -------------------------------------------------------------

def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"class_distribution": list(node.class_distribution)}  # type: ignore[arg-type]
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),  # type: ignore[arg-type]
        "right": _node_to_dict(node.right),  # type: ignore[arg-type]
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "class_distribution" in d:
        return TreeNode(class_distribution=tuple(float(p) for p in d["class_distribution"]))
    return TreeNode(
        feature_index=int(d["feature_index"]),
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def forest_to_dict(model: ForestModel) -> dict:
    return {
        "version": 1,
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "params": model.params.to_dict(),
        "master_seed": model.master_seed,
        "trees": [_node_to_dict(t) for t in model.trees],
    }


def forest_from_dict(d: dict) -> ForestModel:
    if d.get("version") != 1:
        raise ValueError(f"unsupported forest document version {d.get('version')!r}")
    return ForestModel(
        trees=tuple(_node_from_dict(t) for t in d["trees"]),
        n_features=int(d["n_features"]),
        n_classes=int(d["n_classes"]),
        params=ForestParams.from_dict(d["params"]),
        master_seed=int(d["master_seed"]),
    )


def save_forest(model: ForestModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(forest_to_dict(model), fh)


def load_forest(path) -> ForestModel:
    with open(path) as fh:
        return forest_from_dict(json.load(fh))
