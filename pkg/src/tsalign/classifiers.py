"""Brute-force k-nearest-neighbours and a Gini random forest.

Tie-breaking is pinned everywhere so that two runs (or two implementations)
agree exactly:

* KNN neighbour order: distance, then lower training-row index.
* KNN vote: count, then smaller summed neighbour distance, then lower class.
* Tree split: larger Gini gain, then earlier drawn feature, then lower threshold.
* Leaf / forest vote: count, then lower class index.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .alignment import as_array
from .errors import DegenerateInput, DimensionMismatch, KTooLarge
from .seeding import derive_rng

FORMAT_VERSION = 1

# Gini gains below this are treated as "no reduction".
_GAIN_EPS = 1e-12


def _labels(labels, rows: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.size != rows:
        raise DimensionMismatch(f"{y.size} labels for {rows} rows")
    if y.size and y.min() < 0:
        raise ValueError("class labels must be non-negative")
    return y


# ---------------------------------------------------------------------------
# k-nearest neighbours


@dataclass(frozen=True, eq=False)
class KnnModel:
    train: np.ndarray
    labels: np.ndarray
    k: int
    num_classes: int

    @property
    def num_features(self) -> int:
        return self.train.shape[1]

    def __eq__(self, other):
        if not isinstance(other, KnnModel):
            return NotImplemented
        return (
            self.k == other.k
            and self.num_classes == other.num_classes
            and np.array_equal(self.train, other.train)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "knn",
            "k": self.k,
            "num_classes": self.num_classes,
            "train": self.train.tolist(),
            "labels": self.labels.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return knn_fit(np.asarray(d["train"], dtype=np.float64).reshape(len(d["labels"]), -1),
                       d["labels"], d["k"], d["num_classes"])


def knn_fit(train, labels, k: int, num_classes: int | None = None) -> KnnModel:
    x = np.array(as_array(train), dtype=np.float64, copy=True)
    if x.ndim != 2:
        raise DimensionMismatch(f"training data must be 2-D, got shape {x.shape}")
    y = _labels(labels, x.shape[0])
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > x.shape[0]:
        raise KTooLarge(f"k={k} exceeds the {x.shape[0]} training rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("training rows must be finite")
    if num_classes is None:
        num_classes = int(y.max()) + 1
    x.setflags(write=False)
    y = y.copy()
    y.setflags(write=False)
    return KnnModel(x, y, int(k), int(num_classes))


def _pairwise_distances(queries: np.ndarray, train: np.ndarray) -> np.ndarray:
    out = np.empty((queries.shape[0], train.shape[0]))
    # cap the (block, rows, d) difference tensor at ~4M doubles
    block = max(1, 4_000_000 // max(1, train.size))
    for start in range(0, queries.shape[0], block):
        q = queries[start : start + block]
        diff = q[:, None, :] - train[None, :, :]
        out[start : start + block] = np.sqrt(np.einsum("qrd,qrd->qr", diff, diff))
    return out


def knn_predict(model: KnnModel, m) -> np.ndarray:
    q = as_array(m)
    if q.ndim != 2 or q.shape[1] != model.num_features:
        raise DimensionMismatch(f"KNN fitted on {model.num_features} features, got shape {q.shape}")
    dist = _pairwise_distances(q, model.train)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, : model.k]
    out = np.empty(q.shape[0], dtype=np.int64)
    for i in range(q.shape[0]):
        nb = nearest[i]
        nb_labels = model.labels[nb]
        votes = np.bincount(nb_labels, minlength=model.num_classes)
        tied = np.flatnonzero(votes == votes.max())
        if tied.size == 1:
            out[i] = tied[0]
            continue
        nb_dist = dist[i, nb]
        summed = [nb_dist[nb_labels == c].sum() for c in tied]
        out[i] = tied[int(np.argmin(summed))]
    return out


# ---------------------------------------------------------------------------
# random forest


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf. Rows with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, num_classes) class counts of bootstrap rows

    @property
    def num_nodes(self) -> int:
        return self.feature.size

    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = x[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.leaf_class()[self.apply(x)]

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"counts": self.counts[node].tolist()}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, root: dict) -> "DecisionTree":
        feature, threshold, left, right, counts = [], [], [], [], []
        stack = [(root, -1, False)]
        while stack:
            rec, parent, is_right = stack.pop()
            idx = len(feature)
            if parent >= 0:
                (right if is_right else left)[parent] = idx
            if "counts" in rec:
                feature.append(-1)
                threshold.append(0.0)
                counts.append(rec["counts"])
            else:
                feature.append(rec["feature"])
                threshold.append(rec["threshold"])
                counts.append(None)
            left.append(-1)
            right.append(-1)
            if "counts" not in rec:
                stack.append((rec["right"], idx, True))
                stack.append((rec["left"], idx, False))
        width = len(next(c for c in counts if c is not None))
        for i, c in enumerate(counts):
            if c is None:
                counts[i] = [0] * width
        tree = cls(
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            np.asarray(counts, dtype=np.int64),
        )
        # internal-node counts are not serialized; rebuild them from the leaves
        for i in range(tree.num_nodes - 1, -1, -1):
            if tree.feature[i] >= 0:
                tree.counts[i] = tree.counts[tree.left[i]] + tree.counts[tree.right[i]]
        return tree


def _best_split(xs: np.ndarray, y: np.ndarray, num_classes: int, parent_score: float):
    """Best split of one node over the candidate columns of ``xs``.

    Returns ``(column, threshold)`` or ``None`` when no split lowers the Gini
    impurity. Minimizing weighted Gini equals maximizing
    ``sum(left_counts**2)/n_left + sum(right_counts**2)/n_right``.
    """
    m = xs.shape[0]
    order = np.argsort(xs, axis=0, kind="stable")
    xs_sorted = np.take_along_axis(xs, order, axis=0)
    onehot = np.zeros((m, xs.shape[1], num_classes))
    np.put_along_axis(onehot, y[order][:, :, None], 1.0, axis=2)
    left = np.cumsum(onehot, axis=0)[:-1]  # (m-1, f, K): first i+1 sorted rows
    total = left[-1] + onehot[-1]
    right = total[None] - left
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    score = (left * left).sum(axis=2) / n_left + (right * right).sum(axis=2) / n_right
    valid = xs_sorted[1:] > xs_sorted[:-1]
    score = np.where(valid, score, -np.inf)
    # column-major flatten: earlier drawn feature wins, then lower threshold
    flat = score.T.reshape(-1)
    best = int(np.argmax(flat))
    if not flat[best] > parent_score + _GAIN_EPS * m:
        return None
    col, pos = divmod(best, m - 1)
    lo, hi = xs_sorted[pos, col], xs_sorted[pos + 1, col]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return col, thr


def _grow_tree(x: np.ndarray, y: np.ndarray, num_classes: int, rng: np.random.Generator) -> DecisionTree:
    rows, d = x.shape
    boot = rng.integers(0, rows, size=rows)
    m_try = max(1, int(math.isqrt(d)))
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=num_classes))
        return len(feature) - 1

    stack = [(new_node(boot), boot)]
    while stack:
        node, idx = stack.pop()
        c = counts[node]
        m = idx.size
        if m < 2 or np.count_nonzero(c) <= 1:
            continue
        feats = rng.choice(d, size=m_try, replace=False)
        parent_score = float((c.astype(np.float64) ** 2).sum() / m)
        split = _best_split(x[np.ix_(idx, feats)], y[idx], num_classes, parent_score)
        if split is None:
            continue
        col, thr = split
        f = int(feats[col])
        mask = x[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        li, ri = idx[mask], idx[~mask]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # depth-first, left subtree first
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return DecisionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.int64).reshape(len(feature), num_classes),
    )


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[DecisionTree, ...]
    num_trees: int
    seed: int
    num_classes: int
    num_features: int

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "rf",
            "num_trees": self.num_trees,
            "seed": self.seed,
            "num_classes": self.num_classes,
            "num_features": self.num_features,
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        trees = tuple(DecisionTree.from_nested(t) for t in d["trees"])
        return cls(trees, d["num_trees"], d["seed"], d["num_classes"], d["num_features"])

    def __eq__(self, other):
        if not isinstance(other, ForestModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def rf_fit(train, labels, num_trees: int, seed: int, num_classes: int | None = None,
           threads: int = 1) -> ForestModel:
    x = np.asarray(as_array(train), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise DegenerateInput(f"random forest needs >= 2 rows and >= 1 feature, got shape {x.shape}")
    y = _labels(labels, x.shape[0])
    if np.unique(y).size < 2:
        raise DegenerateInput("random forest needs at least 2 classes")
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if num_classes is None:
        num_classes = int(y.max()) + 1

    def grow(t):
        return _grow_tree(x, y, num_classes, derive_rng(seed, "tree", t))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(grow, range(num_trees)))
    else:
        trees = tuple(grow(t) for t in range(num_trees))
    return ForestModel(trees, int(num_trees), int(seed), int(num_classes), x.shape[1])


def rf_predict(model: ForestModel, m) -> np.ndarray:
    x = as_array(m)
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise DimensionMismatch(f"forest fitted on {model.num_features} features, got shape {x.shape}")
    votes = np.zeros((x.shape[0], model.num_classes), dtype=np.int64)
    rows = np.arange(x.shape[0])
    for tree in model.trees:
        np.add.at(votes, (rows, tree.predict(x)), 1)
    return np.argmax(votes, axis=1)


# ---------------------------------------------------------------------------
# pluggable dispatch used by model selection

CLASSIFIER_KINDS = ("knn", "rf")


def fit_classifier(kind: str, param: int, x, y, num_classes: int, seed: int = 0, threads: int = 1):
    if kind == "knn":
        return knn_fit(x, y, param, num_classes)
    if kind == "rf":
        return rf_fit(x, y, param, seed, num_classes, threads=threads)
    raise ValueError(f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")


def predict(model, x) -> np.ndarray:
    if isinstance(model, KnnModel):
        return knn_predict(model, x)
    if isinstance(model, ForestModel):
        return rf_predict(model, x)
    raise TypeError(f"not a classifier model: {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
    if d["kind"] == "knn":
        return KnnModel.from_dict(d)
    if d["kind"] == "rf":
        return ForestModel.from_dict(d)
    raise ValueError(f"unknown model kind {d['kind']!r}")
