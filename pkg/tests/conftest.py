import numpy as np
import pytest

from tsalign.dataset import ChannelId, JobRecord, LabeledDataset


def make_dataset(lengths, channels=7, num_classes=None, seed=0):
    rng = np.random.default_rng(seed)
    num_classes = num_classes or min(len(lengths), 2)
    jobs = [
        JobRecord(f"j{i}", i % num_classes, rng.standard_normal((channels, length)))
        for i, length in enumerate(lengths)
    ]
    return LabeledDataset(
        tuple(ChannelId(c, f"ch{c}") for c in range(channels)),
        tuple(jobs),
        tuple(f"c{k}" for k in range(num_classes)),
    )


@pytest.fixture
def small_dataset():
    return make_dataset([120, 300], channels=7)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)
