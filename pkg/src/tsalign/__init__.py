"""Fixed-length featurization and classification of variable-length,
multi-channel time series."""
from .alignment import (
    AlignmentConfig,
    FeatureMatrix,
    Method,
    align_dataset,
    fourier_top_n,
    subset_middle,
    subset_random,
    subset_start,
    window_stats,
)
from .dataset import JobRecord, LabeledDataset, SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .model_selection import FittedPipeline, GridPoint, evaluate, grid_search, make_grid

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig",
    "FeatureMatrix",
    "FittedPipeline",
    "GridPoint",
    "JobRecord",
    "LabeledDataset",
    "Method",
    "SyntheticSpec",
    "align_dataset",
    "evaluate",
    "fourier_top_n",
    "generate_synthetic",
    "grid_search",
    "load_dataset",
    "make_grid",
    "save_dataset",
    "subset_middle",
    "subset_random",
    "subset_start",
    "window_stats",
]
