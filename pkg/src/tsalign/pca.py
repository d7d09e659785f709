"""Principal component analysis via the SVD of the centered training matrix."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .alignment import FeatureMatrix, as_array
from .errors import DegenerateInput, DimensionMismatch, RankTooSmall


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64, copy=True).reshape(-1)
        comps = np.array(self.components, dtype=np.float64, copy=True)
        ev = np.array(self.explained_variance, dtype=np.float64, copy=True).reshape(-1)
        if comps.ndim != 2 or comps.shape[1] != mean.size or comps.shape[0] != ev.size:
            raise DimensionMismatch(
                f"inconsistent PCA shapes: mean {mean.shape}, components {comps.shape}, variance {ev.shape}"
            )
        for a in (mean, comps, ev):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", ev)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PcaModel):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.components, other.components)
            and np.array_equal(self.explained_variance, other.explained_variance)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(d["mean"], d["components"], d["explained_variance"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        return cls.from_dict(json.loads(text))


def max_components(rows: int, cols: int) -> int:
    """Largest admissible k for a ``rows x cols`` fitting matrix."""
    return min(rows - 1, cols)


def fit_pca(m, k: int) -> PcaModel:
    x = as_array(m)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DegenerateInput(f"PCA needs at least 2 rows, got shape {x.shape}")
    rows, cols = x.shape
    bound = max_components(rows, cols)
    if not 1 <= k <= bound:
        raise RankTooSmall(f"k={k} outside [1, {bound}] for a {rows}x{cols} matrix")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:k].copy()
    # make the largest-magnitude entry of every component positive
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PcaModel(mean, comps, s[:k] ** 2 / (rows - 1))


def project(model: PcaModel, m):
    x = as_array(m)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise DimensionMismatch(f"PCA fitted on {model.d} columns, got shape {x.shape}")
    out = (x - model.mean) @ model.components.T
    if isinstance(m, FeatureMatrix):
        return m.with_data(out)
    return out


def reconstruct(model: PcaModel, projected) -> np.ndarray:
    return as_array(projected) @ model.components + model.mean
