"""Fixed-length featurization of variable-length channels.

Each per-series function works along the last axis, so a whole job's
``(C, L)`` channel block is processed in one call.
"""
from __future__ import annotations

import csv
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    EmptySeries,
    InsufficientLength,
    IoFailure,
    MalformedRow,
)
from .seeding import derive_rng


class Method(str, enum.Enum):
    START = "start"
    MIDDLE = "middle"
    RANDOM = "random"
    WINDOW_MEAN = "window-mean"
    WINDOW_STD = "window-std"
    FOURIER = "fourier"

    def __str__(self):
        return self.value


METHOD_NAMES = tuple(m.value for m in Method)


@dataclass(frozen=True)
class AlignmentConfig:
    method: Method
    n: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {"method": self.method.value, "n": self.n, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentConfig":
        return cls(Method(d["method"]), d["n"], d.get("seed", 0))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows are jobs. Aligned matrices use the sample-major layout: column
    ``s*C + c`` holds feature slot ``s`` of channel ``c``."""

    data: np.ndarray
    job_ids: tuple[str, ...]
    labels: np.ndarray
    n: int | None = None
    num_channels: int | None = None
    layout: str = "sample-major"

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise DimensionMismatch(f"feature data must be 2-D, got shape {data.shape}")
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        job_ids = tuple(self.job_ids)
        if labels.size != data.shape[0] or len(job_ids) != data.shape[0]:
            raise DimensionMismatch("job_ids/labels length must equal the row count")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature matrix contains non-finite entries")
        if self.n is not None and self.num_channels is not None:
            if data.shape[1] != self.n * self.num_channels:
                raise DimensionMismatch(
                    f"{data.shape[1]} columns, expected n*C = {self.n * self.num_channels}"
                )
        data.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "job_ids", job_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __len__(self):
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.job_ids == other.job_ids
            and np.array_equal(self.labels, other.labels)
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )

    __hash__ = None

    def with_data(self, data: np.ndarray) -> "FeatureMatrix":
        """Same rows, new columns (drops the aligned layout tag)."""
        return FeatureMatrix(data, self.job_ids, self.labels, layout="derived")

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureMatrix(
            self.data[rows],
            tuple(self.job_ids[i] for i in rows),
            self.labels[rows],
            self.n,
            self.num_channels,
            self.layout,
        )


def as_array(m) -> np.ndarray:
    if isinstance(m, FeatureMatrix):
        return m.data
    return np.asarray(m, dtype=np.float64)


# ---------------------------------------------------------------------------
# per-series operations


def _check_length(series: np.ndarray, n: int) -> int:
    length = series.shape[-1]
    if length < n:
        raise InsufficientLength(f"series of length {length} is shorter than n={n}")
    return length


def subset_start(series, n: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    _check_length(x, n)
    return x[..., :n].copy()


def middle_offset(length: int, n: int) -> int:
    return (length - n) // 2


def subset_middle(series, n: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    o = middle_offset(_check_length(x, n), n)
    return x[..., o : o + n].copy()


def random_offset(length: int, n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(0, length - n + 1))


def subset_random(series, n: int, rng: np.random.Generator) -> np.ndarray:
    """Contiguous window at a uniformly drawn offset (one offset for all rows of ``series``)."""
    x = np.asarray(series, dtype=np.float64)
    o = random_offset(_check_length(x, n), n, rng)
    return x[..., o : o + n].copy()


def window_bounds(length: int, n: int) -> np.ndarray:
    """``n + 1`` boundaries; window ``w`` spans ``[b[w], b[w+1])``."""
    return (np.arange(n + 1, dtype=np.int64) * length) // n


def window_stats(series, n: int, stat: str = "mean") -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    length = _check_length(x, n)
    if stat not in ("mean", "std"):
        raise ValueError(f"stat must be 'mean' or 'std', got {stat!r}")
    bounds = window_bounds(length, n)
    starts = bounds[:-1]
    counts = np.diff(bounds)
    means = np.add.reduceat(x, starts, axis=-1) / counts
    if stat == "mean":
        return means
    dev = x - np.repeat(means, counts, axis=-1)
    # population variance: divisor is the window size
    return np.sqrt(np.add.reduceat(dev * dev, starts, axis=-1) / counts)


def full_spectrum(series) -> np.ndarray:
    """Unnormalized DFT over all ``L`` bins (test hook for Parseval checks)."""
    x = np.asarray(series, dtype=np.float64)
    if x.shape[-1] < 1:
        raise EmptySeries("cannot transform an empty series")
    return np.fft.fft(x, axis=-1)


def one_sided_magnitudes(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.shape[-1] < 1:
        raise EmptySeries("cannot transform an empty series")
    return np.abs(np.fft.rfft(x, axis=-1))


def fourier_top_n(series, n: int) -> np.ndarray:
    """The ``n`` largest one-sided DFT magnitudes, descending; ties keep the
    lower frequency first; zero-padded when fewer than ``n`` bins exist."""
    mag = one_sided_magnitudes(series)
    order = np.argsort(-mag, axis=-1, kind="stable")
    ranked = np.take_along_axis(mag, order, axis=-1)
    keep = min(n, ranked.shape[-1])
    out = np.zeros(ranked.shape[:-1] + (n,))
    out[..., :keep] = ranked[..., :keep]
    return out


# ---------------------------------------------------------------------------
# dataset level


def featurize_job(channels: np.ndarray, config: AlignmentConfig, job_index: int) -> np.ndarray:
    """``(C, L)`` block to a ``(C, n)`` block."""
    n = config.n
    method = config.method
    if method is Method.START:
        return subset_start(channels, n)
    if method is Method.MIDDLE:
        return subset_middle(channels, n)
    if method is Method.RANDOM:
        return subset_random(channels, n, derive_rng(config.seed, "random-window", job_index))
    if method is Method.WINDOW_MEAN:
        return window_stats(channels, n, "mean")
    if method is Method.WINDOW_STD:
        return window_stats(channels, n, "std")
    return fourier_top_n(channels, n)


def align_dataset(dataset: LabeledDataset, config: AlignmentConfig, threads: int = 1) -> FeatureMatrix:
    if not dataset.jobs:
        raise EmptyDataset("cannot align a dataset without jobs")
    if config.method is not Method.FOURIER:
        for job in dataset.jobs:
            if job.length < config.n:
                raise InsufficientLength(
                    f"job {job.job_id!r} has length {job.length} < n={config.n} "
                    f"required by method {config.method.value!r}",
                    job_id=job.job_id,
                )
    c = dataset.num_channels
    out = np.empty((len(dataset.jobs), config.n * c))

    def fill(j):
        block = featurize_job(dataset.jobs[j].channels, config, j)
        out[j] = block.T.reshape(-1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(len(dataset.jobs))))
    else:
        for j in range(len(dataset.jobs)):
            fill(j)
    return FeatureMatrix(
        out,
        tuple(job.job_id for job in dataset.jobs),
        dataset.labels,
        config.n,
        c,
    )


def save_features(fm: FeatureMatrix, path) -> None:
    path = Path(path)
    header = ["job_id", "label", *(f"f{i}" for i in range(fm.shape[1]))]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for job_id, label, row in zip(fm.job_ids, fm.labels.tolist(), fm.data.tolist()):
                fh.write(f"{job_id},{label}," + ",".join(map(repr, row)) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write features to {path}: {exc}") from exc


def load_features(path) -> FeatureMatrix:
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read features {path}: {exc}") from exc
    job_ids, labels, rows = [], [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["job_id", "label"]:
            raise MalformedRow(f"{path}: header must start with job_id,label")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise MalformedRow(f"line {lineno}: expected {width} fields, got {len(row)}")
            try:
                labels.append(int(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise MalformedRow(f"line {lineno}: non-numeric field") from None
            job_ids.append(row[0])
    if not rows:
        raise EmptyDataset(f"{path}: no feature rows")
    return FeatureMatrix(np.asarray(rows), tuple(job_ids), np.asarray(labels), layout="loaded")
