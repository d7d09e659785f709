"""Stratified splitting, cross-validated grid search and final evaluation.

Every fold refits its own scaler and PCA on the fold-train rows only.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import classifiers
from .alignment import AlignmentConfig, as_array
from .errors import ClassTooSmall, DimensionMismatch, EmptyGrid
from .pca import PcaModel, fit_pca, max_components, project
from .report import MetricsReport, metrics_from_predictions
from .scaling import ScalerModel, fit_minmax, transform_minmax
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


def _class_members(labels) -> dict[int, np.ndarray]:
    y = np.asarray(labels, dtype=np.int64)
    return {int(c): np.flatnonzero(y == c) for c in np.unique(y)}


def apportion(counts: Sequence[int], fraction: float) -> list[int]:
    """Largest-remainder split of ``round(fraction * total)`` across classes.

    Remainder ties go to the lower class position. Each class keeps at least
    one member on both sides.
    """
    counts = [int(c) for c in counts]
    targets = [fraction * c for c in counts]
    floors = [int(np.floor(t)) for t in targets]
    total = int(np.floor(fraction * sum(counts) + 0.5))
    leftover = total - sum(floors)
    by_remainder = sorted(range(len(counts)), key=lambda i: (-(targets[i] - floors[i]), i))
    for i in by_remainder[: max(0, leftover)]:
        floors[i] += 1
    return [min(max(f, 1), c - 1) for f, c in zip(floors, counts)]


def stratified_shuffle_split(labels, test_fraction: float, seed: int) -> SplitIndices:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    members = _class_members(labels)
    small = {c: len(m) for c, m in members.items() if len(m) < 2}
    if small:
        raise ClassTooSmall(f"classes with fewer than 2 members: {small}")
    classes = sorted(members)
    n_test = apportion([len(members[c]) for c in classes], test_fraction)
    train, test = [], []
    for c, t in zip(classes, n_test):
        perm = derive_rng(seed, "split", c).permutation(members[c])
        test.append(perm[:t])
        train.append(perm[t:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)))


def stratified_k_fold(labels, k: int, seed: int) -> list[SplitIndices]:
    """Each class is shuffled and dealt round-robin over the folds; the dealer
    position carries over between classes so fold sizes stay balanced."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    members = _class_members(labels)
    small = {c: len(m) for c, m in members.items() if len(m) < k}
    if small:
        raise ClassTooSmall(f"classes with fewer than k={k} members: {small}")
    n = sum(len(m) for m in members.values())
    fold_of = np.empty(n, dtype=np.int64)
    dealer = 0
    for c in sorted(members):
        perm = derive_rng(seed, "kfold", c).permutation(members[c])
        fold_of[perm] = (dealer + np.arange(perm.size)) % k
        dealer = (dealer + perm.size) % k
    return [SplitIndices(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]


@dataclass(frozen=True)
class GridPoint:
    pca_k: int
    classifier: str
    param: int

    def to_dict(self) -> dict:
        return {"pca_k": self.pca_k, "classifier": self.classifier, "param": self.param}

    @classmethod
    def from_dict(cls, d: dict) -> "GridPoint":
        return cls(int(d["pca_k"]), d["classifier"], int(d["param"]))

    def __str__(self):
        name = {"knn": "n_neighbors", "rf": "n_estimators"}.get(self.classifier, "param")
        return f"pca_k={self.pca_k} {self.classifier}({name}={self.param})"


def make_grid(pca_ks: Sequence[int], knn_ks: Sequence[int] = (), rf_trees: Sequence[int] = ()) -> list[GridPoint]:
    """Cartesian product in enumeration order: PCA dimension, then KNN, then RF."""
    grid = []
    for k in pca_ks:
        grid.extend(GridPoint(int(k), "knn", int(v)) for v in knn_ks)
        grid.extend(GridPoint(int(k), "rf", int(v)) for v in rf_trees)
    return grid


PAPER_GRID = make_grid((256, 512), knn_ks=(7, 9), rf_trees=(100, 200))


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    scaler: ScalerModel
    pca: PcaModel
    model: object
    grid_point: GridPoint
    class_names: tuple[str, ...]
    alignment: AlignmentConfig | None = None

    def __post_init__(self):
        if self.scaler.num_columns != self.pca.d:
            raise DimensionMismatch("scaler and PCA column counts differ")
        if getattr(self.model, "num_features", self.pca.k) != self.pca.k:
            raise DimensionMismatch("classifier input width differs from the PCA dimension")

    @property
    def num_features(self) -> int:
        return self.scaler.num_columns

    def predict(self, m) -> np.ndarray:
        x = as_array(m)
        if x.ndim != 2 or x.shape[1] != self.num_features:
            raise DimensionMismatch(f"pipeline expects {self.num_features} columns, got shape {x.shape}")
        return classifiers.predict(self.model, project(self.pca, transform_minmax(self.scaler, x)))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "alignment": None if self.alignment is None else self.alignment.to_dict(),
            "grid_point": self.grid_point.to_dict(),
            "class_names": list(self.class_names),
            "scaler": self.scaler.to_dict(),
            "pca": self.pca.to_dict(),
            "classifier": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPipeline":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported pipeline format_version {d.get('format_version')!r}")
        return cls(
            ScalerModel.from_dict(d["scaler"]),
            PcaModel.from_dict(d["pca"]),
            classifiers.model_from_dict(d["classifier"]),
            GridPoint.from_dict(d["grid_point"]),
            tuple(d["class_names"]),
            None if d.get("alignment") is None else AlignmentConfig.from_dict(d["alignment"]),
        )


@dataclass(frozen=True)
class GridEntry:
    point: GridPoint
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    table: tuple[GridEntry, ...]
    filtered: tuple[tuple[GridPoint, str], ...]
    best_index: int
    pipeline: FittedPipeline
    folds: int
    seed: int
    # (fold, pca_k) -> (scaler, pca); populated only when requested
    fold_preprocessing: dict = field(default_factory=dict)
    timings_ms: dict = field(default_factory=dict)

    @property
    def best(self) -> GridEntry:
        return self.table[self.best_index]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "folds": self.folds,
            "seed": self.seed,
            "preprocessing_fit": "per-fold (scaler and PCA fit on fold-train rows only)",
            "grid": [e.point.to_dict() for e in self.table] + [p.to_dict() for p, _ in self.filtered],
            "table": [
                {
                    **e.point.to_dict(),
                    "fold_accuracies": list(e.fold_accuracies),
                    "mean_accuracy": e.mean_accuracy,
                }
                for e in self.table
            ],
            "filtered": [{**p.to_dict(), "reason": reason} for p, reason in self.filtered],
            "best": {**self.best.point.to_dict(), "mean_accuracy": self.best.mean_accuracy},
        }


def _accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return float(np.count_nonzero(y_true == y_pred)) / y_true.size


def fit_preprocessing(x: np.ndarray, pca_k: int) -> tuple[ScalerModel, PcaModel]:
    scaler = fit_minmax(x)
    return scaler, fit_pca(transform_minmax(scaler, x), pca_k)


def _feasibility(point: GridPoint, rows: int, cols: int) -> str | None:
    bound = max_components(rows, cols)
    if point.pca_k < 1 or point.pca_k > bound:
        return f"pca_k={point.pca_k} exceeds min(fold_train_rows-1, features) = {bound}"
    if point.classifier not in classifiers.CLASSIFIER_KINDS:
        return f"unknown classifier {point.classifier!r}"
    if point.param < 1:
        return f"classifier parameter must be >= 1, got {point.param}"
    if point.classifier == "knn" and point.param > rows:
        return f"n_neighbors={point.param} exceeds the {rows} fold-train rows"
    return None


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def grid_search(train_features, grid: Sequence[GridPoint], folds: int = 5, seed: int = 0,
                labels=None, class_names: Sequence[str] | None = None,
                alignment: AlignmentConfig | None = None, threads: int = 1,
                keep_fold_models: bool = False) -> GridSearchResult:
    """Cross-validated grid search followed by a refit of the best point on
    every training row.

    Infeasible grid points (PCA dimension above the fold-train bound, or more
    neighbours than fold-train rows) are dropped with a logged notice and
    listed in ``GridSearchResult.filtered``.
    """
    x = as_array(train_features)
    if labels is None:
        labels = train_features.labels
    y = np.asarray(labels, dtype=np.int64)
    if y.size != x.shape[0]:
        raise DimensionMismatch(f"{y.size} labels for {x.shape[0]} rows")
    num_classes = len(class_names) if class_names is not None else int(y.max()) + 1
    if class_names is None:
        class_names = [f"class_{k}" for k in range(num_classes)]
    splits = stratified_k_fold(y, folds, seed)
    min_rows = min(s.train.size for s in splits)

    feasible, filtered = [], []
    for point in grid:
        reason = _feasibility(point, min_rows, x.shape[1])
        if reason is None:
            feasible.append(point)
        else:
            log.info("grid point %s filtered: %s", point, reason)
            filtered.append((point, reason))
    if not feasible:
        raise EmptyGrid(f"no feasible grid point among {len(grid)} ({[r for _, r in filtered]})")

    forest_seed = derive_seed(seed, "forest")
    prep_keys = sorted({(f, p.pca_k) for f in range(folds) for p in feasible})

    def prep(key):
        f, k = key
        tr, te = splits[f].train, splits[f].test
        scaler, pca = fit_preprocessing(x[tr], k)
        z_tr = project(pca, transform_minmax(scaler, x[tr]))
        z_te = project(pca, transform_minmax(scaler, x[te]))
        return scaler, pca, z_tr, z_te

    prepared = dict(zip(prep_keys, _map(prep, prep_keys, threads)))

    tasks = [(i, f) for i in range(len(feasible)) for f in range(folds)]

    def run(task):
        i, f = task
        point = feasible[i]
        _, _, z_tr, z_te = prepared[(f, point.pca_k)]
        model = classifiers.fit_classifier(point.classifier, point.param, z_tr, y[splits[f].train],
                                           num_classes, seed=forest_seed)
        return _accuracy(y[splits[f].test], classifiers.predict(model, z_te))

    scores = dict(zip(tasks, _map(run, tasks, threads)))
    table = []
    for i, point in enumerate(feasible):
        accs = tuple(scores[(i, f)] for f in range(folds))
        table.append(GridEntry(point, accs, sum(accs) / folds))
    best_index = 0
    for i, entry in enumerate(table):
        if entry.mean_accuracy > table[best_index].mean_accuracy:
            best_index = i

    best = table[best_index].point
    t0 = time.perf_counter()
    scaler = fit_minmax(x)
    scaled = transform_minmax(scaler, x)
    t1 = time.perf_counter()
    pca = fit_pca(scaled, best.pca_k)
    z = project(pca, scaled)
    t2 = time.perf_counter()
    model = classifiers.fit_classifier(best.classifier, best.param, z, y, num_classes,
                                       seed=forest_seed, threads=threads)
    t3 = time.perf_counter()
    timings = {"scale": (t1 - t0) * 1e3, "pca": (t2 - t1) * 1e3, "fit": (t3 - t2) * 1e3}
    pipeline = FittedPipeline(scaler, pca, model, best, tuple(class_names), alignment)
    fold_models = {key: val[:2] for key, val in prepared.items()} if keep_fold_models else {}
    return GridSearchResult(tuple(table), tuple(filtered), best_index, pipeline, folds, seed,
                            fold_models, timings)


def evaluate(pipeline: FittedPipeline, test_features, labels=None, config: dict | None = None) -> MetricsReport:
    x = as_array(test_features)
    if labels is None:
        labels = test_features.labels
    if x.ndim != 2 or x.shape[1] != pipeline.num_features:
        raise DimensionMismatch(f"pipeline expects {pipeline.num_features} columns, got shape {x.shape}")
    t0 = time.perf_counter()
    scaled = transform_minmax(pipeline.scaler, x)
    t1 = time.perf_counter()
    z = project(pipeline.pca, scaled)
    t2 = time.perf_counter()
    pred = classifiers.predict(pipeline.model, z)
    t3 = time.perf_counter()
    timings = {"scale": (t1 - t0) * 1e3, "pca": (t2 - t1) * 1e3, "predict": (t3 - t2) * 1e3}
    echo = {
        "alignment": None if pipeline.alignment is None else pipeline.alignment.to_dict(),
        "grid_point": pipeline.grid_point.to_dict(),
    }
    echo.update(config or {})
    return metrics_from_predictions(labels, pred, pipeline.class_names, echo, timings)
