"""Punctuation-vector embedding, streaming standardization and exact k-NN recall.

A log line is embedded as the occurrence counts of 39 punctuation characters
followed by its length in code points.  Raw integer vectors are stored in the
index; standardization is applied at query time with the current running
statistics, so old entries stay comparable as the statistics evolve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_FEATURES = 39
DIM = N_FEATURES + 1
EPS = 1e-9

# 32 ASCII punctuation characters, then 7 full-width marks common in CJK logs.
DEFAULT_FEATURES = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~" + "，。：；（）【"


def check_features(features: str) -> str:
    if len(features) != N_FEATURES or len(set(features)) != N_FEATURES:
        raise ValueError(
            f"punctuation feature set must have exactly {N_FEATURES} distinct "
            f"characters, got {len(features)} ({len(set(features))} distinct)"
        )
    return features


def embed(masked_log: str, features: str = DEFAULT_FEATURES) -> np.ndarray:
    """Return the 40-dim count vector ``[c_1 .. c_39, len]`` of a masked log."""
    vec = np.empty(DIM, dtype=np.int64)
    for i, ch in enumerate(features):
        vec[i] = masked_log.count(ch)
    vec[N_FEATURES] = len(masked_log)
    return vec


class Standardizer:
    """Running per-dimension mean/variance (Welford) with a z-score transform.

    Variance is the population variance of everything seen so far.  Dimensions
    whose variance is zero standardize to 0.
    """

    def __init__(self, dim: int = DIM):
        self.n = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def update(self, vec) -> None:
        x = np.asarray(vec, dtype=np.float64)
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (x - self.mean)
        np.maximum(self._m2, 0.0, out=self._m2)

    @property
    def variance(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros_like(self._m2)
        return self._m2 / self.n

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.n == 0:
            return np.zeros_like(x)
        std = np.sqrt(self.variance)
        out = (x - self.mean) / np.maximum(std, EPS)
        zero = std == 0.0
        if zero.any():
            out[..., zero] = 0.0
        return out

    def __eq__(self, other):
        if not isinstance(other, Standardizer):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.mean, other.mean)
                and np.array_equal(self._m2, other._m2))


@dataclass(eq=False)
class VectorIndex:
    """Exact flat index of raw punctuation vectors keyed by template id."""

    ids: list = field(default_factory=list)
    _data: np.ndarray = field(default_factory=lambda: np.zeros((4, DIM), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def vectors(self) -> np.ndarray:
        return self._data[: len(self.ids)]

    @property
    def entries(self) -> list:
        return [(tid, self._data[i].copy()) for i, tid in enumerate(self.ids)]

    def add(self, template_id: int, vec) -> None:
        if template_id in self.ids:
            raise ValueError(f"template id {template_id} already indexed")
        n = len(self.ids)
        if n == len(self._data):
            grown = np.zeros((2 * n, self._data.shape[1]), dtype=np.int64)
            grown[:n] = self._data
            self._data = grown
        self._data[n] = vec
        self.ids.append(template_id)

    def __eq__(self, other):
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.vectors, other.vectors)


def similarity(distance):
    return 1.0 / (1.0 + distance)


def recall(index: VectorIndex, query, k: int, tau: float,
           standardizer: Standardizer | None = None) -> list:
    """Return up to ``k`` ``(template_id, similarity)`` pairs with similarity >= tau.

    Entries are compared to ``query`` (already standardized) by Euclidean
    distance after standardizing them with ``standardizer``.  Similarity is
    ``1 / (1 + d)``; results are ordered by similarity descending, then by
    ascending template id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    n = len(index)
    if n == 0:
        return []
    entries = index.vectors.astype(np.float64)
    if standardizer is not None:
        entries = standardizer.transform(entries)
    diff = entries - np.asarray(query, dtype=np.float64)
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    sims = similarity(dist)
    ids = np.asarray(index.ids)
    order = np.lexsort((ids, -sims))
    out = []
    for i in order:
        s = float(sims[i])
        if s < tau or len(out) == k:
            break
        out.append((int(ids[i]), s))
    return out
