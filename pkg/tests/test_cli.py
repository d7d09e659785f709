import json

import pytest

from tsalign.alignment import load_features
from tsalign.cli import main
from tsalign.dataset import SyntheticSpec, generate_synthetic, load_dataset, save_dataset

from conftest import make_dataset

SMALL = ["--classes", "3", "--per-class", "10", "--len", "150:400", "--channels", "3"]
GRID = ["--pca-k", "4,8,256", "--knn-k", "3,5", "--rf-trees", "5", "--folds", "3"]


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert main(["generate", *SMALL, "--seed", "1", "--out", str(path)]) == 0
    return path


def test_generate(tmp_path):
    out = tmp_path / "d.csv"
    args = ["generate", "--classes", "5", "--per-class", "40", "--len", "200:5000", "--channels", "7",
            "--seed", "42", "--out", str(out)]
    assert main(args) == 0
    ds = load_dataset(out)
    assert len(ds) == 200
    assert ds == generate_synthetic(SyntheticSpec(5, 40, (200, 5000), 7, "uniform", 0.1), 42)
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def test_generate_invalid_spec(tmp_path, capsys):
    assert main(["generate", "--len", "0:10", "--out", str(tmp_path / "x.csv")]) != 0
    assert "InvalidSpec" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_featurize(tmp_path, data_csv):
    out = tmp_path / "f.csv"
    assert main(["featurize", "--data", str(data_csv), "--method", "window-mean", "--n", "100",
                 "--out", str(out)]) == 0
    assert load_features(out).shape == (30, 300)


def test_featurize_names_short_job(tmp_path, capsys):
    path = tmp_path / "short.csv"
    save_dataset(make_dataset([150, 50, 200], channels=2), path)
    rc = main(["featurize", "--data", str(path), "--method", "start", "--n", "100",
               "--out", str(tmp_path / "f.csv")])
    assert rc != 0
    assert "'j1'" in capsys.readouterr().err


def test_featurize_fourier_repeatable(tmp_path, data_csv):
    outs = []
    for i in range(2):
        out = tmp_path / f"f{i}.csv"
        assert main(["featurize", "--in", str(data_csv), "--method", "fourier", "--n", "100",
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_train_then_evaluate(tmp_path, data_csv):
    feats = tmp_path / "f.csv"
    assert main(["featurize", "--data", str(data_csv), "--method", "window-mean", "--n", "50",
                 "--out", str(feats)]) == 0
    out = tmp_path / "model"
    assert main(["train", "--features", str(feats), *GRID, "--out", str(out)]) == 0
    grid = json.loads((out / "grid_search.json").read_text())
    assert grid["folds"] == 3
    assert [f["pca_k"] for f in grid["filtered"]] == [256, 256, 256]
    assert main(["evaluate", "--pipeline", str(out / "pipeline.json"), "--features", str(feats),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["class_names"] == ["class_0", "class_1", "class_2"]
    assert 0.0 <= report["accuracy"] <= 1.0


def _run_all(out, *extra):
    return main(["run-all", *SMALL, *GRID, "--seed", "4", "--out", str(out), *extra])


def test_run_all_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run_all(a, "--threads", "1") == 0
    assert _run_all(b, "--threads", "3") == 0
    for name in ("report.json", "grid_search.json", "pipeline.json", "report.confusion.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    report = json.loads((a / "report.json").read_text())
    run_config = report["config"]["run_config"]
    assert run_config["seed"] == 4 and set(run_config["seeds"]) >= {"split", "cv", "forest", "random_window"}
    assert "threads" not in run_config
    timings = json.loads((a / "report.timings.json").read_text())["timings_ms"]
    assert set(timings) == {"featurize", "scale", "pca", "fit", "predict"}


def test_run_all_rerun_from_embedded_config(tmp_path):
    a, c = tmp_path / "a", tmp_path / "c"
    assert _run_all(a) == 0
    assert main(["run-all", "--config", str(a / "report.json"), "--out", str(c)]) == 0
    for name in ("report.json", "grid_search.json", "pipeline.json"):
        assert (a / name).read_bytes() == (c / name).read_bytes(), name


def test_run_all_missing_dataset(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run-all", "--data", str(tmp_path / "missing.csv"), "--out", str(out)])
    assert rc != 0
    assert not out.exists()
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_run_all_rejects_data_plus_synthetic(tmp_path, data_csv):
    assert main(["run-all", "--data", str(data_csv), "--classes", "3", "--out", str(tmp_path / "o")]) == 2


def test_bench(tmp_path, data_csv):
    out = tmp_path / "bench"
    assert main(["bench", "--data", str(data_csv), "--n", "100,150", "--reps", "1", "--out", str(out)]) == 0
    doc = json.loads((out / "bench.json").read_text())
    assert len(doc["records"]) == 12
    for r in doc["records"]:
        assert r["throughput"] == r["samples"] / r["elapsed_s"]
    assert (out / "bench.txt").read_text().split()[:5] == ["method", "n", "samples", "ms", "samples/s"]


def test_bench_default_reps(tmp_path, data_csv):
    out = tmp_path / "bench"
    assert main(["bench", "--data", str(data_csv), "--methods", "start", "--n", "10", "--out", str(out)]) == 0
    assert json.loads((out / "bench.json").read_text())["config"]["reps"] == 5


def test_bench_unknown_method(tmp_path, capsys):
    assert main(["bench", "--methods", "start,wavelet", "--out", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "wavelet" in err and "window-mean" in err and "fourier" in err


def test_inputs_not_mutated(tmp_path, data_csv):
    before = data_csv.read_bytes()
    assert main(["featurize", "--data", str(data_csv), "--method", "random", "--n", "20",
                 "--out", str(tmp_path / "f.csv")]) == 0
    assert data_csv.read_bytes() == before
