import io
import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsalign.alignment import AlignmentConfig
from tsalign.dataset import SyntheticSpec, generate_synthetic
from tsalign.report import (
    bench_featurize,
    dumps,
    emit_report,
    format_float,
    load_report,
    metrics_from_predictions,
)


def _report():
    return metrics_from_predictions(
        [0, 0, 1, 1, 2, 2], [0, 1, 1, 1, 0, 2], ["a", "b", "c"],
        config={"alignment": {"method": "window-mean", "n": 100, "seed": 3}},
        timings_ms={"featurize": 1.5, "predict": 0.25},
    )


def test_metrics_values():
    r = _report()
    assert r.accuracy == pytest.approx(4 / 6)
    assert r.confusion == ((1, 1, 0), (0, 2, 0), (1, 0, 1))
    assert r.precision == (0.5, 2 / 3, 1.0)
    assert r.recall == (0.5, 1.0, 0.5)
    assert np.trace(np.array(r.confusion)) / r.total == r.accuracy


def test_undefined_precision_flagged():
    r = metrics_from_predictions([0, 1], [0, 0], ["a", "b"])
    assert r.precision == (0.5, 0.0) and r.precision_undefined == (False, True)
    assert r.recall_undefined == (False, False)


def test_emit_round_trip(tmp_path):
    r = _report()
    emit_report(r, tmp_path / "report.json")
    assert load_report(tmp_path / "report.json") == r
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["format_version"] == 1
    assert "timings_ms" not in doc


def test_confusion_csv(tmp_path):
    emit_report(_report(), tmp_path / "report.json")
    lines = (tmp_path / "report.confusion.csv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[1] == "a,1,1,0"


def test_accuracy_has_six_significant_digits(tmp_path):
    r = metrics_from_predictions([0, 1, 1, 1], [0, 1, 1, 0], ["a", "b"])
    emit_report(r, tmp_path / "r.json")
    text = (tmp_path / "r.json").read_text()
    assert '"accuracy": 0.750000' in text


@settings(max_examples=300)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    s = format_float(x)
    assert float(s) == x
    digits = s.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
    assert len(digits) >= 6 or x == 0.0


def test_dumps_is_valid_json_with_stable_order():
    obj = {"z": 1, "a": [1.5, 2], "m": {"k": [{"x": None, "y": True}]}}
    text = dumps(obj)
    assert json.loads(text) == obj
    assert text.index('"z"') < text.index('"a"')


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_report_round_trip_property(pairs):
    y_true, y_pred = zip(*pairs)
    r = metrics_from_predictions(y_true, y_pred, ["a", "b", "c", "d"], timings_ms={"fit": 3.0})
    with tempfile.TemporaryDirectory() as d:
        emit_report(r, Path(d) / "r.json")
        again = load_report(Path(d) / "r.json")
    assert again == r
    assert np.trace(np.array(again.confusion)) / again.total == again.accuracy


def test_bench_records_consistent():
    ds = generate_synthetic(SyntheticSpec(2, 3, (300, 600), 3, "uniform", 0.1), 0)
    configs = [AlignmentConfig("window-mean", 50), AlignmentConfig("fourier", 50)]
    buf = io.StringIO()
    records = bench_featurize(ds, configs, repetitions=3, out=buf)
    assert len(records) == 2
    assert records[0].samples == records[1].samples == int(ds.lengths.sum()) * 3
    for r in records:
        assert r.elapsed_s > 0
        assert r.throughput == r.samples / r.elapsed_s
    header = buf.getvalue().splitlines()[0].split()
    assert header == ["method", "n", "samples", "ms", "samples/s"]


def test_bench_takes_best_of_reps(monkeypatch):
    import tsalign.report as report_mod

    ticks = iter([0.0, 5.0, 10.0, 12.0, 20.0, 27.0])
    monkeypatch.setattr(report_mod.time, "perf_counter", lambda: next(ticks))
    ds = generate_synthetic(SyntheticSpec(1, 2, (20, 20), 1, "uniform", 0.0), 0)
    (rec,) = bench_featurize(ds, [AlignmentConfig("start", 5)], repetitions=3, out=io.StringIO())
    assert rec.elapsed_s == 2.0
    assert isinstance(rec, report_mod.BenchRecord)
