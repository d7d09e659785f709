"""Labelled, hash-derived random streams.

Every consumer of randomness asks for a stream keyed by ``(seed, label,
index...)`` so results never depend on evaluation order or thread count.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *keys: object) -> int:
    """Return a 64-bit seed deterministically derived from ``seed`` and ``keys``."""
    text = ":".join([str(int(seed) & _MASK64), *(str(k) for k in keys)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *keys: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
