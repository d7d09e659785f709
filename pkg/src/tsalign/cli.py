"""Command-line entry point: ``tsalign <command> [flags]``.

Commands: generate, featurize, train, evaluate, run-all, bench.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import alignment as al
from .dataset import (
    LabeledDataset,
    SyntheticSpec,
    default_threads,
    generate_synthetic,
    load_dataset,
    manifest_path,
    save_dataset,
)
from .errors import IoFailure, TsAlignError
from .model_selection import (
    FittedPipeline,
    GridSearchResult,
    evaluate,
    grid_search,
    make_grid,
    stratified_shuffle_split,
)
from .report import bench_featurize, emit_report, format_bench_table, write_json
from .seeding import derive_seed

log = logging.getLogger("tsalign")

FORMAT_VERSION = 1

SYNTHETIC_DEFAULTS = {
    "classes": 5,
    "per_class": 40,
    "len": "200:5000",
    "channels": 7,
    "placement": "uniform",
    "noise": 0.1,
    "n_max": 1000,
}


class UsageError(Exception):
    """Bad flag values; reported with exit code 2."""


@dataclass
class RunConfig:
    """Everything that determines a run-all result. Thread count and output
    location are deliberately absent: they never change the numbers."""

    method: str = "window-mean"
    n: int = 100
    seed: int = 0
    test_fraction: float = 0.2
    folds: int = 5
    pca_k: list = field(default_factory=lambda: [256, 512])
    classifiers: list = field(default_factory=lambda: ["knn", "rf"])
    knn_k: list = field(default_factory=lambda: [7, 9])
    rf_trees: list = field(default_factory=lambda: [100, 200])
    dataset: str | None = None
    synthetic: dict | None = None

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise UsageError("exactly one of a dataset path or a synthetic spec is required")

    @property
    def alignment(self) -> al.AlignmentConfig:
        return al.AlignmentConfig(self.method, self.n, derive_seed(self.seed, "random-window"))

    @property
    def seeds(self) -> dict:
        return {
            "global": self.seed,
            "random_window": derive_seed(self.seed, "random-window"),
            "split": derive_seed(self.seed, "split"),
            "cv": derive_seed(self.seed, "cv"),
            "forest": derive_seed(derive_seed(self.seed, "cv"), "forest"),
            "synthetic": None if self.synthetic is None else derive_seed(self.seed, "synthetic"),
        }

    def grid(self):
        return make_grid(
            self.pca_k,
            knn_ks=self.knn_k if "knn" in self.classifiers else (),
            rf_trees=self.rf_trees if "rf" in self.classifiers else (),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = self.seeds
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d.get("run_config", d))
        d.pop("seeds", None)
        return cls(**d)


# ---------------------------------------------------------------------------
# flag parsing helpers


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _length_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--len expects LO:HI, got {text!r}") from None
    return lo, hi


def _methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in names if m not in al.METHOD_NAMES]
    if unknown or not names:
        raise UsageError(f"unknown method(s) {unknown}; valid methods: {', '.join(al.METHOD_NAMES)}")
    return names


def _synthetic_from_args(args, require: bool) -> dict | None:
    given = {k: getattr(args, k) for k in SYNTHETIC_DEFAULTS if getattr(args, k, None) is not None}
    if not given and not require:
        return None
    return {k: given.get(k, v) for k, v in SYNTHETIC_DEFAULTS.items()}


def _spec(synthetic: dict) -> SyntheticSpec:
    return SyntheticSpec(
        num_classes=int(synthetic["classes"]),
        jobs_per_class=int(synthetic["per_class"]),
        length_range=_length_range(str(synthetic["len"])),
        channels=int(synthetic["channels"]),
        placement=synthetic["placement"],
        noise_std=float(synthetic["noise"]),
        n_max=int(synthetic["n_max"]),
    )


def _resolve_dataset(dataset: str | None, synthetic: dict | None, seed: int, threads: int) -> LabeledDataset:
    if dataset is not None:
        return load_dataset(dataset)
    return generate_synthetic(_spec(synthetic), derive_seed(seed, "synthetic"), threads=threads)


def _threads(args) -> int:
    return max(1, args.threads if args.threads is not None else default_threads())


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _grid_document(result: GridSearchResult, run_config: dict | None) -> dict:
    doc = {"run_config": run_config} if run_config is not None else {}
    doc.update(result.to_dict())
    return doc


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    synthetic = _synthetic_from_args(args, require=True)
    spec = _spec(synthetic)
    # the file seed is the flag itself so `generate --seed 42` documents exactly what ran
    ds = generate_synthetic(spec, args.seed, threads=_threads(args))
    out = Path(args.out) if args.out else Path("out") / "dataset.csv"
    _ensure_dir(out.parent)
    save_dataset(ds, out)
    print(f"wrote {len(ds)} jobs x {ds.num_channels} channels to {out}")
    return 0


def cmd_featurize(args) -> int:
    method = _methods(args.method)
    if len(method) != 1:
        raise UsageError("featurize takes exactly one --method")
    ds = load_dataset(args.data)
    config = al.AlignmentConfig(method[0], args.n, derive_seed(args.seed, "random-window"))
    fm = al.align_dataset(ds, config, threads=_threads(args))
    out = Path(args.out) if args.out else Path("out") / "features.csv"
    _ensure_dir(out.parent)
    al.save_features(fm, out)
    _write_text(manifest_path(out), "".join(name + "\n" for name in ds.class_names))
    print(f"wrote {fm.shape[0]}x{fm.shape[1]} feature matrix ({config.method.value}, n={config.n}) to {out}")
    return 0


def _class_names_for(path: Path, labels) -> list[str]:
    mpath = manifest_path(path)
    if mpath.exists():
        return [line for line in mpath.read_text(encoding="utf-8").splitlines() if line]
    return [f"class_{k}" for k in range(int(max(labels)) + 1)]


def cmd_train(args) -> int:
    features_path = Path(args.features)
    fm = al.load_features(features_path)
    names = _class_names_for(features_path, fm.labels)
    grid = make_grid(args.pca_k, knn_ks=args.knn_k if "knn" in args.classifiers else (),
                     rf_trees=args.rf_trees if "rf" in args.classifiers else ())
    cv_seed = derive_seed(args.seed, "cv")
    result = grid_search(fm, grid, args.folds, cv_seed, class_names=names, threads=_threads(args))
    echo = {"features": str(args.features), "seed": args.seed, "cv_seed": cv_seed}
    out = _ensure_dir(Path(args.out))
    write_json(_grid_document(result, echo), out / "grid_search.json")
    write_json(result.pipeline.to_dict(), out / "pipeline.json")
    best = result.best
    print(f"best {best.point}: mean CV accuracy {best.mean_accuracy:.4f}; wrote {out}/pipeline.json")
    return 0


def cmd_evaluate(args) -> int:
    try:
        pipeline = FittedPipeline.from_dict(json.loads(Path(args.pipeline).read_text(encoding="utf-8")))
    except OSError as exc:
        raise IoFailure(f"cannot read pipeline {args.pipeline}: {exc}") from exc
    fm = al.load_features(args.features)
    report = evaluate(pipeline, fm, config={"features": str(args.features)})
    out = _ensure_dir(Path(args.out))
    emit_report(report, out / "report.json")
    print(f"accuracy {report.accuracy:.4f} on {report.total} rows; wrote {out}/report.json")
    return 0


def run_all(config: RunConfig, out: Path, threads: int = 1) -> dict:
    """Split, grid search, refit and evaluate; returns the written documents."""
    ds = _resolve_dataset(config.dataset, config.synthetic, config.seed, threads)
    t0 = time.perf_counter()
    fm = al.align_dataset(ds, config.alignment, threads=threads)
    featurize_ms = (time.perf_counter() - t0) * 1e3
    seeds = config.seeds
    split = stratified_shuffle_split(fm.labels, config.test_fraction, seeds["split"])
    train, test = fm.take(split.train), fm.take(split.test)
    result = grid_search(train, config.grid(), config.folds, seeds["cv"], class_names=ds.class_names,
                         alignment=config.alignment, threads=threads)
    run_doc = config.to_dict()
    report = evaluate(result.pipeline, test, config={"run_config": run_doc,
                                                     "train_rows": int(split.train.size),
                                                     "test_rows": int(split.test.size)})
    timings = {
        "featurize": featurize_ms,
        "scale": result.timings_ms["scale"],
        "pca": result.timings_ms["pca"],
        "fit": result.timings_ms["fit"],
        "predict": report.timings_ms["predict"],
    }
    report = replace(report, timings_ms=timings)
    pipeline_doc = {"run_config": run_doc, **result.pipeline.to_dict()}
    # nothing touches the output directory until every stage has succeeded
    _ensure_dir(out)
    write_json(_grid_document(result, run_doc), out / "grid_search.json")
    write_json(pipeline_doc, out / "pipeline.json")
    emit_report(report, out / "report.json")
    return {"report": report, "grid_search": result}


def cmd_run_all(args) -> int:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(f"cannot read config {args.config}: {exc}") from exc
        if "run_config" not in doc and "config" in doc:
            doc = doc["config"]
        config = RunConfig.from_dict(doc)
    else:
        synthetic = _synthetic_from_args(args, require=args.data is None)
        if args.data is not None and synthetic is not None:
            raise UsageError("give either --data or synthetic flags, not both")
        config = RunConfig(
            method=_methods(args.method)[0],
            n=args.n,
            seed=args.seed,
            test_fraction=args.test_fraction,
            folds=args.folds,
            pca_k=list(args.pca_k),
            classifiers=list(args.classifiers),
            knn_k=list(args.knn_k),
            rf_trees=list(args.rf_trees),
            dataset=args.data,
            synthetic=synthetic,
        )
    out = Path(args.out)
    docs = run_all(config, out, threads=_threads(args))
    report, result = docs["report"], docs["grid_search"]
    print(f"best {result.best.point} (mean CV {result.best.mean_accuracy:.4f}); "
          f"test accuracy {report.accuracy:.4f}; wrote {out}")
    return 0


def cmd_bench(args) -> int:
    methods = _methods(args.methods)
    synthetic = _synthetic_from_args(args, require=args.data is None)
    if args.data is not None and synthetic is not None:
        raise UsageError("give either --data or synthetic flags, not both")
    threads = _threads(args)
    ds = _resolve_dataset(args.data, synthetic, args.seed, threads)
    configs = [al.AlignmentConfig(m, n, derive_seed(args.seed, "random-window"))
               for m in methods for n in args.n]
    records = bench_featurize(ds, configs, args.reps, threads=threads)
    out = _ensure_dir(Path(args.out))
    write_json({
        "format_version": FORMAT_VERSION,
        "config": {"dataset": args.data, "synthetic": synthetic, "seed": args.seed,
                   "methods": methods, "n": list(args.n), "reps": args.reps},
        "records": [r.to_dict() for r in records],
    }, out / "bench.json")
    _write_text(out / "bench.txt", format_bench_table(records) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")


def _add_synthetic(p):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--classes", type=int, default=None)
    g.add_argument("--per-class", dest="per_class", type=int, default=None)
    g.add_argument("--len", default=None, metavar="LO:HI")
    g.add_argument("--channels", type=int, default=None)
    g.add_argument("--placement", choices=("uniform", "delayed"), default=None)
    g.add_argument("--noise", type=float, default=None)
    g.add_argument("--n-max", dest="n_max", type=int, default=None)


def _add_grid(p):
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--pca-k", type=_int_list, default=[256, 512])
    p.add_argument("--classifiers", type=lambda s: [c for c in s.split(",") if c], default=["knn", "rf"])
    p.add_argument("--knn-k", type=_int_list, default=[7, 9])
    p.add_argument("--rf-trees", type=_int_list, default=[100, 200])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsalign", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded synthetic dataset")
    _add_common(p)
    _add_synthetic(p)
    p.add_argument("--out", default=None, help="dataset CSV path (default out/dataset.csv)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("featurize", help="align a dataset into a feature matrix CSV")
    _add_common(p)
    p.add_argument("--data", "--in", dest="data", required=True)
    p.add_argument("--method", required=True, help=f"one of: {', '.join(al.METHOD_NAMES)}")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", default=None, help="feature CSV path (default out/features.csv)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="grid search on a feature CSV; saves the refit pipeline")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved pipeline on a feature CSV")
    _add_common(p)
    p.add_argument("--pipeline", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-all", help="split, grid search, refit, evaluate")
    _add_common(p)
    _add_synthetic(p)
    _add_grid(p)
    p.add_argument("--data", default=None, help="dataset CSV (omit to generate synthetic data)")
    p.add_argument("--config", default=None, help="re-run from a run_config embedded in a previous output")
    p.add_argument("--method", default="window-mean")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run_all)

    p = sub.add_parser("bench", help="time the featurization methods")
    _add_common(p)
    _add_synthetic(p)
    p.add_argument("--data", "--in", dest="data", default=None)
    p.add_argument("--methods", default=",".join(al.METHOD_NAMES))
    p.add_argument("--n", type=_int_list, default=[100, 1000])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tsalign {args.command}: {exc}", file=sys.stderr)
        return 2
    except (TsAlignError, ValueError, OSError) as exc:
        print(f"tsalign {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
