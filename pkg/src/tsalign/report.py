"""Metrics reports and featurization benchmarks.

``emit_report(report, "out/report.json")`` writes three files:

* ``report.json`` -- deterministic content (no wall-clock data), stable key order
* ``report.confusion.csv`` -- header plus one row per true class
* ``report.timings.json`` -- per-stage wall-clock milliseconds

Timings live in their own file so that two identical runs produce
byte-identical ``report.json`` documents.
"""
from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import AlignmentConfig, align_dataset
from .dataset import LabeledDataset
from .errors import IoFailure

FORMAT_VERSION = 1
STAGES = ("featurize", "scale", "pca", "fit", "predict")


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    confusion: tuple[tuple[int, ...], ...]
    class_names: tuple[str, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    precision_undefined: tuple[bool, ...]
    recall_undefined: tuple[bool, ...]
    config: dict = field(default_factory=dict)
    timings_ms: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.confusion)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "accuracy": self.accuracy,
            "total": self.total,
            "class_names": list(self.class_names),
            "confusion": [list(row) for row in self.confusion],
            "per_class": [
                {
                    "class": name,
                    "precision": self.precision[i],
                    "recall": self.recall[i],
                    "precision_undefined": self.precision_undefined[i],
                    "recall_undefined": self.recall_undefined[i],
                }
                for i, name in enumerate(self.class_names)
            ],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict, timings_ms: dict | None = None) -> "MetricsReport":
        per = d["per_class"]
        return cls(
            accuracy=d["accuracy"],
            confusion=tuple(tuple(row) for row in d["confusion"]),
            class_names=tuple(d["class_names"]),
            precision=tuple(p["precision"] for p in per),
            recall=tuple(p["recall"] for p in per),
            precision_undefined=tuple(p["precision_undefined"] for p in per),
            recall_undefined=tuple(p["recall_undefined"] for p in per),
            config=d.get("config", {}),
            timings_ms=dict(timings_ms or {}),
        )


def metrics_from_predictions(y_true, y_pred, class_names: Sequence[str], config: dict | None = None,
                             timings_ms: dict | None = None) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    c = len(class_names)
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    total = int(confusion.sum())
    tp = np.diag(confusion)
    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    precision, recall = [], []
    for k in range(c):
        precision.append(float(tp[k]) / float(col[k]) if col[k] else 0.0)
        recall.append(float(tp[k]) / float(row[k]) if row[k] else 0.0)
    return MetricsReport(
        accuracy=float(np.trace(confusion)) / total if total else 0.0,
        confusion=tuple(tuple(int(v) for v in r) for r in confusion),
        class_names=tuple(class_names),
        precision=tuple(precision),
        recall=tuple(recall),
        precision_undefined=tuple(bool(col[k] == 0) for k in range(c)),
        recall_undefined=tuple(bool(row[k] == 0) for k in range(c)),
        config=dict(config or {}),
        timings_ms=dict(timings_ms or {}),
    )


# ---------------------------------------------------------------------------
# JSON emission


def format_float(x: float) -> str:
    """Round-trip float literal with at least 6 significant digits."""
    if not math.isfinite(x):
        raise ValueError(f"cannot emit non-finite value {x!r}")
    padded = f"{x:#.6g}"
    if float(padded) == x:
        return padded
    return repr(float(x))


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """``json.dumps`` look-alike that keeps insertion order and pads floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> None:
    try:
        Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def emit_report(report: MetricsReport, path) -> None:
    path = Path(path)
    write_json(report.to_dict(), path)
    write_json({"format_version": FORMAT_VERSION, "timings_ms": report.timings_ms},
               _sidecar(path, ".timings.json"))
    lines = ["true\\pred," + ",".join(report.class_names)]
    for name, row in zip(report.class_names, report.confusion):
        lines.append(name + "," + ",".join(str(v) for v in row))
    try:
        _sidecar(path, ".confusion.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write confusion matrix next to {path}: {exc}") from exc


def load_report(path) -> MetricsReport:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        tpath = _sidecar(path, ".timings.json")
        timings = json.loads(tpath.read_text(encoding="utf-8"))["timings_ms"] if tpath.exists() else {}
    except OSError as exc:
        raise IoFailure(f"cannot read report {path}: {exc}") from exc
    return MetricsReport.from_dict(data, timings)


# ---------------------------------------------------------------------------
# featurization benchmark


@dataclass(frozen=True)
class BenchRecord:
    method: str
    n: int
    samples: int
    elapsed_s: float
    throughput: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n": self.n,
            "samples": self.samples,
            "elapsed_s": self.elapsed_s,
            "throughput": self.throughput,
        }


def bench_featurize(dataset: LabeledDataset, configs: Sequence[AlignmentConfig], repetitions: int = 5,
                    threads: int = 1, out=None) -> list[BenchRecord]:
    """Best-of-``repetitions`` wall time per config, run sequentially."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples = int(dataset.lengths.sum()) * dataset.num_channels
    records = []
    for config in configs:
        best = math.inf
        for _ in range(repetitions):
            t0 = time.perf_counter()
            align_dataset(dataset, config, threads=threads)
            best = min(best, time.perf_counter() - t0)
        # a clock too coarse to see the run still needs elapsed > 0
        best = max(best, 1e-9)
        records.append(BenchRecord(config.method.value, config.n, samples, best, samples / best))
    print(format_bench_table(records), file=out if out is not None else sys.stdout)
    return records


def format_bench_table(records: Sequence[BenchRecord]) -> str:
    header = ("method", "n", "samples", "ms", "samples/s")
    rows = [
        (r.method, str(r.n), str(r.samples), f"{r.elapsed_s * 1e3:.3f}", f"{r.throughput:.4g}")
        for r in records
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    for row in rows:
        lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths))))
    return "\n".join(lines)
