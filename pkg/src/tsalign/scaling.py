"""Per-column min-max scaling, fit on training rows only."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .alignment import FeatureMatrix, as_array
from .errors import DimensionMismatch, EmptyMatrix


@dataclass(frozen=True, eq=False)
class ScalerModel:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64, copy=True).reshape(-1)
        maxs = np.array(self.maxs, dtype=np.float64, copy=True).reshape(-1)
        if mins.shape != maxs.shape:
            raise DimensionMismatch("mins and maxs differ in length")
        if not (np.all(np.isfinite(mins)) and np.all(np.isfinite(maxs))):
            raise ValueError("scaler extrema must be finite")
        if np.any(mins > maxs):
            raise ValueError("scaler requires min <= max in every column")
        mins.setflags(write=False)
        maxs.setflags(write=False)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def num_columns(self) -> int:
        return self.mins.size

    def __eq__(self, other):
        if not isinstance(other, ScalerModel):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.maxs, other.maxs)

    __hash__ = None

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerModel":
        return cls(d["mins"], d["maxs"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ScalerModel":
        return cls.from_dict(json.loads(text))


def fit_minmax(train) -> ScalerModel:
    x = as_array(train)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyMatrix(f"cannot fit a scaler on an empty matrix of shape {x.shape}")
    return ScalerModel(x.min(axis=0), x.max(axis=0))


def transform_minmax(model: ScalerModel, m):
    """Affine map per column; degenerate columns become 0.0; no clipping."""
    x = as_array(m)
    if x.ndim != 2 or x.shape[1] != model.num_columns:
        raise DimensionMismatch(
            f"scaler fitted on {model.num_columns} columns, got shape {x.shape}"
        )
    span = model.maxs - model.mins
    degenerate = span == 0
    out = (x - model.mins) / np.where(degenerate, 1.0, span)
    out[:, degenerate] = 0.0
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(out, m.job_ids, m.labels, m.n, m.num_channels, m.layout)
    return out
