"""Labelled multi-channel time-series datasets: CSV I/O and a synthetic generator.

On disk a dataset is a long-format CSV with header
``job_id,label,timestamp,<ch0>,...,<chC-1>`` plus a sidecar manifest at
``<path>.classes`` holding one class name per line (index = line number).
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    InconsistentChannels,
    InvalidSpec,
    IoFailure,
    MalformedRow,
    UnknownLabel,
)
from .seeding import derive_rng

GPU_CHANNELS = (
    "gpu_util",
    "gpu_mem_util",
    "gpu_mem_free",
    "gpu_mem_used",
    "gpu_temp",
    "gpu_mem_temp",
    "gpu_power",
)

_FIXED_COLUMNS = ("job_id", "label", "timestamp")


def default_channel_names(c: int) -> list[str]:
    if c == len(GPU_CHANNELS):
        return list(GPU_CHANNELS)
    return [f"ch{i}" for i in range(c)]


@dataclass(frozen=True)
class ChannelId:
    index: int
    name: str


@dataclass(frozen=True, eq=False)
class JobRecord:
    """One job: ``channels`` is a read-only ``(C, L)`` float64 array."""

    job_id: str
    label: int
    channels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.channels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InconsistentChannels(
                f"job {self.job_id!r}: channels must form a non-empty (C, L) array, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    @property
    def length(self) -> int:
        return self.channels.shape[1]

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, JobRecord):
            return NotImplemented
        return (
            self.job_id == other.job_id
            and self.label == other.label
            and self.channels.shape == other.channels.shape
            and bool(np.array_equal(self.channels, other.channels))
        )

    __hash__ = None


@dataclass(frozen=True)
class LabeledDataset:
    channels: tuple[ChannelId, ...]
    jobs: tuple[JobRecord, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        names = [ch.name for ch in self.channels]
        if len(set(names)) != len(names):
            raise InconsistentChannels(f"duplicate channel names: {names}")
        if [ch.index for ch in self.channels] != list(range(len(self.channels))):
            raise InconsistentChannels("channel indices must be contiguous from 0")
        c = len(self.channels)
        seen = set()
        for job in self.jobs:
            if job.num_channels != c:
                raise InconsistentChannels(
                    f"job {job.job_id!r} has {job.num_channels} channels, dataset has {c}"
                )
            if not 0 <= job.label < len(self.class_names):
                raise UnknownLabel(f"job {job.job_id!r} has label {job.label} outside class table")
            seen.add(job.label)
        if self.jobs:
            missing = [self.class_names[k] for k in range(len(self.class_names)) if k not in seen]
            if missing:
                raise EmptyDataset(f"classes without jobs: {missing}")

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    @property
    def labels(self) -> np.ndarray:
        return np.array([job.label for job in self.jobs], dtype=np.int64)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([job.length for job in self.jobs], dtype=np.int64)

    def __len__(self):
        return len(self.jobs)


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".classes")


# ---------------------------------------------------------------------------
# CSV I/O


def save_dataset(dataset: LabeledDataset, path) -> None:
    if not dataset.jobs:
        raise EmptyDataset("refusing to write a dataset without jobs")
    path = Path(path)
    header = [*_FIXED_COLUMNS, *(ch.name for ch in dataset.channels)]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for job in dataset.jobs:
                prefix = f"{job.job_id},{dataset.class_names[job.label]},"
                for t, row in enumerate(job.channels.T.tolist()):
                    fh.write(prefix + str(t) + "," + ",".join(map(repr, row)) + "\n")
        with open(manifest_path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write("".join(name + "\n" for name in dataset.class_names))
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {path}: {exc}") from exc


def _read_manifest(path: Path) -> list[str] | None:
    mpath = manifest_path(path)
    if not mpath.exists():
        return None
    try:
        with open(mpath, encoding="utf-8") as fh:
            names = [line.rstrip("\r\n") for line in fh]
    except OSError as exc:
        raise IoFailure(f"cannot read class manifest {mpath}: {exc}") from exc
    while names and names[-1] == "":
        names.pop()
    if len(set(names)) != len(names):
        raise MalformedRow(f"{mpath}: duplicate class names")
    return names


def _parse_sample(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(f"line {lineno}: non-numeric value {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(f"line {lineno}: non-finite value {text!r} in column {column!r}")
    return value


def load_dataset(path) -> LabeledDataset:
    """Read a long-format CSV (and its ``.classes`` manifest when present).

    Jobs keep their first-appearance order; rows within a job are sorted by
    timestamp. Without a manifest, class names are taken in first-appearance
    order.
    """
    path = Path(path)
    manifest = _read_manifest(path)
    class_index = None if manifest is None else {name: i for i, name in enumerate(manifest)}
    class_names = list(manifest) if manifest is not None else []
    order: list[str] = []
    labels: dict[str, str] = {}
    stamps: dict[str, list[int]] = {}
    rows: dict[str, list[list[float]]] = {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: empty file")
        if tuple(header[:3]) != _FIXED_COLUMNS or len(header) < 4:
            raise MalformedRow(
                f"{path}: header must be job_id,label,timestamp,<channels...>; got {header}"
            )
        channel_names = header[3:]
        if len(set(channel_names)) != len(channel_names):
            raise InconsistentChannels(f"{path}: duplicate channel names in header")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) > width:
                raise MalformedRow(f"line {lineno}: expected {width} fields, got {len(row)}")
            if len(row) < 3:
                raise MalformedRow(f"line {lineno}: expected {width} fields, got {len(row)}")
            job_id, label, ts = row[0], row[1], row[2]
            values = row[3:]
            if len(values) < len(channel_names) or any(v.strip() == "" for v in values):
                present = sum(1 for v in values if v.strip() != "")
                raise InconsistentChannels(
                    f"line {lineno}: job {job_id!r} has {present} of {len(channel_names)} channel values"
                )
            try:
                t = int(ts)
            except ValueError:
                raise MalformedRow(f"line {lineno}: timestamp {ts!r} is not an integer") from None
            if t < 0:
                raise MalformedRow(f"line {lineno}: negative timestamp {t}")
            samples = [_parse_sample(v, lineno, channel_names[i]) for i, v in enumerate(values)]
            if job_id not in labels:
                order.append(job_id)
                labels[job_id] = label
                stamps[job_id] = []
                rows[job_id] = []
                if class_index is None and label not in class_names:
                    class_names.append(label)
            elif labels[job_id] != label:
                raise MalformedRow(
                    f"line {lineno}: job {job_id!r} relabelled from {labels[job_id]!r} to {label!r}"
                )
            if class_index is not None and label not in class_index:
                raise UnknownLabel(f"line {lineno}: label {label!r} not in class manifest")
            stamps[job_id].append(t)
            rows[job_id].append(samples)
    if not order:
        raise EmptyDataset(f"{path}: no data rows")
    lookup = {name: i for i, name in enumerate(class_names)}
    jobs = []
    for job_id in order:
        ts = np.asarray(stamps[job_id], dtype=np.int64)
        perm = np.argsort(ts, kind="stable")
        ts = ts[perm]
        if ts.size > 1 and np.any(np.diff(ts) == 0):
            raise MalformedRow(f"job {job_id!r}: duplicate timestamps")
        data = np.asarray(rows[job_id], dtype=np.float64)[perm].T
        jobs.append(JobRecord(job_id, lookup[labels[job_id]], data))
    channels = tuple(ChannelId(i, name) for i, name in enumerate(channel_names))
    return LabeledDataset(channels, tuple(jobs), tuple(class_names))


# ---------------------------------------------------------------------------
# synthetic data

SIGNATURE_AMPLITUDE = 0.5
BASELINE_OFFSET = 0.5
BASELINE_PERIOD = 40.0


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 5
    jobs_per_class: int = 40
    length_range: tuple[int, int] = (200, 5000)
    channels: int = 7
    placement: str = "uniform"
    noise_std: float = 0.1
    # largest N the delayed placement must defeat
    n_max: int = 1000

    def validate(self) -> None:
        lo, hi = self.length_range
        if self.num_classes < 1 or self.jobs_per_class < 1:
            raise InvalidSpec("num_classes and jobs_per_class must be >= 1")
        if self.channels < 1:
            raise InvalidSpec("channels must be >= 1")
        if lo < 1 or lo > hi:
            raise InvalidSpec(f"length range must satisfy 1 <= L_min <= L_max, got {lo}:{hi}")
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise InvalidSpec("noise_std must be finite and >= 0")
        if self.placement not in ("uniform", "delayed"):
            raise InvalidSpec(f"placement must be 'uniform' or 'delayed', got {self.placement!r}")
        if self.n_max < 1:
            raise InvalidSpec("n_max must be >= 1")
        if self.placement == "delayed" and lo <= 2 * self.n_max:
            raise InvalidSpec(
                f"delayed placement needs L_min > 2*n_max = {2 * self.n_max}, got L_min={lo}"
            )

    @property
    def delay(self) -> int:
        return 2 * self.n_max if self.placement == "delayed" else 0


def class_offset(label: int, channel: int, num_classes: int) -> float:
    """Mean level of ``channel`` for class ``label`` (a cyclic shift per channel)."""
    return ((label + channel) % num_classes) / num_classes


def class_period(label: int) -> float:
    return 16.0 + 8.0 * label


def signature(label: int, num_classes: int, num_channels: int, t: np.ndarray) -> np.ndarray:
    """Noise-free class signal, shape ``(num_channels, len(t))``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty((num_channels, t.size))
    period = class_period(label)
    for c in range(num_channels):
        phase = 2.0 * np.pi * c / num_channels
        out[c] = class_offset(label, c, num_classes) + SIGNATURE_AMPLITUDE * np.sin(
            2.0 * np.pi * t / period + phase
        )
    return out


def baseline(num_channels: int, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty((num_channels, t.size))
    for c in range(num_channels):
        phase = 2.0 * np.pi * c / num_channels
        out[c] = BASELINE_OFFSET + SIGNATURE_AMPLITUDE * np.sin(2.0 * np.pi * t / BASELINE_PERIOD + phase)
    return out


def generate_job(spec: SyntheticSpec, seed: int, job_index: int, label: int) -> JobRecord:
    """Build one job from its own stream; the label never touches the stream."""
    rng = derive_rng(seed, "job", job_index)
    lo, hi = spec.length_range
    length = int(rng.integers(lo, hi + 1))
    noise = rng.standard_normal((spec.channels, length)) * spec.noise_std
    t = np.arange(length)
    delay = min(spec.delay, length)
    clean = np.empty((spec.channels, length))
    clean[:, :delay] = baseline(spec.channels, t[:delay])
    clean[:, delay:] = signature(label, spec.num_classes, spec.channels, t[delay:])
    return JobRecord(f"job{job_index:05d}", label, clean + noise)


def generate_synthetic(spec: SyntheticSpec, seed: int, threads: int = 1) -> LabeledDataset:
    spec.validate()
    total = spec.num_classes * spec.jobs_per_class

    def build(i):
        return generate_job(spec, seed, i, i % spec.num_classes)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            jobs = list(pool.map(build, range(total)))
    else:
        jobs = [build(i) for i in range(total)]
    names = default_channel_names(spec.channels)
    return LabeledDataset(
        tuple(ChannelId(i, n) for i, n in enumerate(names)),
        tuple(jobs),
        tuple(f"class_{k}" for k in range(spec.num_classes)),
    )


def default_threads() -> int:
    return os.cpu_count() or 1
