"""Vector storage and the L2 distance kernels shared by every other module.

Vectors are held as a contiguous float32 matrix (row i is point i); all
distance arithmetic is carried out in float64 so comparisons are stable.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Dataset", "l2_distance", "squared_l2_distance"]


class Dataset:
    """Immutable n x d matrix of float32 vectors with row index as point id.

    An empty dataset is canonicalized to shape (0, 0): the on-disk formats
    cannot represent a dimension without at least one record.
    """

    def __init__(self, vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {vectors.shape}")
        if vectors.shape[0] == 0:
            vectors = vectors.reshape(0, 0)
        if not np.all(np.isfinite(vectors)):
            raise ValueError("dataset contains NaN or Inf values")
        self._vectors = vectors
        self._vectors.setflags(write=False)
        self._vectors64: np.ndarray | None = None

    @classmethod
    def from_array(cls, array) -> "Dataset":
        return cls(np.asarray(array))

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def vectors64(self) -> np.ndarray:
        """float64 view of the data, materialized once and cached."""
        if self._vectors64 is None:
            v = self._vectors.astype(np.float64)
            v.setflags(write=False)
            self._vectors64 = v
        return self._vectors64

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def count(self) -> int:
        return self._vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    def vector(self, i: int) -> np.ndarray:
        return self._vectors[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self._vectors.shape == other._vectors.shape and np.array_equal(
            self._vectors, other._vectors
        )

    def __repr__(self) -> str:
        return f"Dataset(count={self.count}, dim={self.dim})"


def _as_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("distance arguments must be 1-D vectors")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def squared_l2_distance(a, b) -> float:
    """Squared Euclidean distance; the monotone surrogate used internally."""
    a, b = _as_pair(a, b)
    d = a - b
    # einsum, not np.dot: keeps the reduction order identical to the batch
    # kernels below so scalar and vectorized paths agree bitwise.
    return float(np.einsum("i,i->", d, d))


def l2_distance(a, b) -> float:
    """Euclidean distance between two vectors of equal dimension."""
    return math.sqrt(squared_l2_distance(a, b))


def distances_to_many(dataset: Dataset, query, ids=None) -> np.ndarray:
    """L2 distances from `query` to every point (or to the ids given).

    Accumulates in float64; returns a float64 array aligned with `ids`
    (or with the full dataset when ids is None).
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != dataset.dim:
        raise ValueError(f"query dimension {q.shape} does not match dataset dim {dataset.dim}")
    rows = dataset.vectors64 if ids is None else dataset.vectors64[ids]
    diff = rows - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def pairwise_distances(dataset: Dataset, left_ids, right_ids) -> np.ndarray:
    """Elementwise L2 distances between paired point ids (equal-length arrays)."""
    a = dataset.vectors64[np.asarray(left_ids)]
    b = dataset.vectors64[np.asarray(right_ids)]
    diff = a - b
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))
