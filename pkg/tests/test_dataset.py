import math

import numpy as np
import pytest

from tsalign.dataset import (
    ChannelId,
    JobRecord,
    LabeledDataset,
    SyntheticSpec,
    class_offset,
    class_period,
    generate_job,
    generate_synthetic,
    load_dataset,
    manifest_path,
    save_dataset,
)
from tsalign.errors import (
    EmptyDataset,
    InconsistentChannels,
    InvalidSpec,
    IoFailure,
    MalformedRow,
    UnknownLabel,
)

from conftest import make_dataset


def _write(tmp_path, text, classes=("a", "b")):
    path = tmp_path / "d.csv"
    path.write_text(text)
    if classes is not None:
        manifest_path(path).write_text("".join(c + "\n" for c in classes))
    return path


def test_load_two_jobs_seven_channels(tmp_path):
    header = "job_id,label,timestamp," + ",".join(f"c{i}" for i in range(7)) + "\n"
    rows = []
    for job, label, length in (("x", "a", 120), ("y", "b", 300)):
        for t in range(length):
            rows.append(f"{job},{label},{t}," + ",".join(str(t + i) for i in range(7)))
    ds = load_dataset(_write(tmp_path, header + "\n".join(rows) + "\n"))
    assert [j.length for j in ds.jobs] == [120, 300]
    assert ds.num_channels == 7
    assert [j.label for j in ds.jobs] == [0, 1]


def test_missing_channel_value_is_inconsistent(tmp_path):
    text = "job_id,label,timestamp,a,b,c,d,e,f,g\nx,a,0,1,2,3,4,5,6,7\nx,a,1,1,2,3,4,5,6\n"
    with pytest.raises(InconsistentChannels, match="6 of 7"):
        load_dataset(_write(tmp_path, text))


def test_empty_channel_field_is_inconsistent(tmp_path):
    text = "job_id,label,timestamp,a,b\nx,a,0,1,\n"
    with pytest.raises(InconsistentChannels):
        load_dataset(_write(tmp_path, text))


@pytest.mark.parametrize(
    "body",
    [
        "x,a,0,1,2,3\n",  # too many fields
        "x,a,0,1,abc\n",
        "x,a,0,1,nan\n",
        "x,a,-1,1,2\n",
        "x,a,zero,1,2\n",
        "x,a,0,1,2\nx,a,0,3,4\n",  # duplicate timestamp
        "x,a,0,1,2\nx,b,1,3,4\n",  # relabelled job
    ],
)
def test_malformed_rows(tmp_path, body):
    with pytest.raises(MalformedRow):
        load_dataset(_write(tmp_path, "job_id,label,timestamp,p,q\n" + body))


def test_unknown_label(tmp_path):
    with pytest.raises(UnknownLabel):
        load_dataset(_write(tmp_path, "job_id,label,timestamp,p\nx,zzz,0,1\n"))


def test_header_only_is_empty(tmp_path):
    with pytest.raises(EmptyDataset):
        load_dataset(_write(tmp_path, "job_id,label,timestamp,p\n", classes=None))


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        load_dataset(tmp_path / "nope.csv")


def test_rows_sorted_by_timestamp_and_grouped_in_first_appearance_order(tmp_path):
    text = "job_id,label,timestamp,p\ny,b,5,50\nx,a,2,2\ny,b,1,10\nx,a,0,0\n"
    ds = load_dataset(_write(tmp_path, text))
    assert [j.job_id for j in ds.jobs] == ["y", "x"]
    assert ds.jobs[0].channels.tolist() == [[10.0, 50.0]]
    assert ds.jobs[1].channels.tolist() == [[0.0, 2.0]]


def test_manifest_optional(tmp_path):
    ds = load_dataset(_write(tmp_path, "job_id,label,timestamp,p\nx,q,0,1\ny,r,0,2\n", classes=None))
    assert ds.class_names == ("q", "r")


def test_save_refuses_empty(tmp_path):
    ds = LabeledDataset((ChannelId(0, "p"),), (), ("a",))
    with pytest.raises(EmptyDataset):
        save_dataset(ds, tmp_path / "e.csv")
    assert not (tmp_path / "e.csv").exists()


def test_save_single_job(tmp_path):
    ds = LabeledDataset((ChannelId(0, "p"),), (JobRecord("j", 0, [[0.0, 1.5]]),), ("a",))
    path = tmp_path / "one.csv"
    save_dataset(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "job_id,label,timestamp,p"
    assert len(lines) == 3
    assert load_dataset(path) == ds


def test_round_trip_bit_exact(tmp_path):
    ds = make_dataset([5, 17, 3], channels=3, num_classes=2, seed=3)
    # awkward doubles must survive text
    jobs = list(ds.jobs)
    jobs[0] = JobRecord("j0", 0, [[0.1, 1e-300, -2.5e17, 1 / 3, math.pi]] * 3)
    ds = LabeledDataset(ds.channels, tuple(jobs), ds.class_names)
    path = tmp_path / "rt.csv"
    save_dataset(ds, path)
    assert load_dataset(path) == ds


def test_job_records_are_immutable():
    job = JobRecord("j", 0, [[1.0, 2.0]])
    with pytest.raises(ValueError):
        job.channels[0, 0] = 5.0


def test_dataset_invariants():
    with pytest.raises(InconsistentChannels):
        LabeledDataset((ChannelId(0, "a"), ChannelId(1, "a")), (), ())
    with pytest.raises(InconsistentChannels):
        LabeledDataset((ChannelId(0, "a"),), (JobRecord("j", 0, [[1.0], [2.0]]),), ("c",))
    with pytest.raises(EmptyDataset):
        LabeledDataset((ChannelId(0, "a"),), (JobRecord("j", 0, [[1.0]]),), ("c", "d"))


# ---------------------------------------------------------------------------
# synthetic generator


def test_generate_shape_and_lengths():
    ds = generate_synthetic(SyntheticSpec(5, 40, (200, 5000), 7, "uniform", 0.1), 42)
    assert len(ds) == 200
    assert all(200 <= L <= 5000 for L in ds.lengths)
    assert np.bincount(ds.labels).tolist() == [40] * 5
    assert ds.num_channels == 7


def test_generate_deterministic():
    spec = SyntheticSpec(3, 4, (50, 80), 2, "uniform", 0.0)
    assert generate_synthetic(spec, 9) == generate_synthetic(spec, 9)
    spec = SyntheticSpec(3, 4, (50, 80), 2, "uniform", 0.3)
    assert generate_synthetic(spec, 9) == generate_synthetic(spec, 9, threads=4)
    assert generate_synthetic(spec, 9) != generate_synthetic(spec, 10)


def test_noise_free_channel_mean_is_class_offset():
    spec = SyntheticSpec(4, 3, (100, 900), 3, "uniform", 0.0)
    ds = generate_synthetic(spec, 5)
    for job in ds.jobs:
        for c in range(spec.channels):
            values = job.channels[c].tolist()
            length = len(values)
            # brute-force residual of the sinusoid over a partial period
            residual = sum(
                0.5 * math.sin(2 * math.pi * t / class_period(job.label) + 2 * math.pi * c / spec.channels)
                for t in range(length)
            ) / length
            mean = sum(values) / length
            assert abs(mean - residual - class_offset(job.label, c, spec.num_classes)) < 1e-9


def test_delayed_prefix_is_label_independent():
    spec = SyntheticSpec(5, 2, (2100, 2600), 4, "delayed", 0.2)
    for index in range(6):
        a = generate_job(spec, 11, index, 0)
        b = generate_job(spec, 11, index, 3)
        assert np.array_equal(a.channels[:, : 2 * spec.n_max], b.channels[:, : 2 * spec.n_max])
        assert not np.array_equal(a.channels, b.channels)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"length_range": (0, 10)},
        {"length_range": (20, 10)},
        {"channels": 0},
        {"noise_std": -1.0},
        {"placement": "sideways"},
        {"placement": "delayed", "length_range": (200, 5000)},
    ],
)
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        generate_synthetic(SyntheticSpec(**kwargs), 0)


def test_generator_any_channel_count():
    ds = generate_synthetic(SyntheticSpec(2, 2, (10, 10), 1, "uniform", 0.1), 0)
    assert ds.num_channels == 1
    assert [ch.name for ch in ds.channels] == ["ch0"]
