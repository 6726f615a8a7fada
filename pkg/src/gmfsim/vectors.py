"""Dense/sparse vector primitives.

Dense vectors are plain 1-D ``float64`` numpy arrays. :class:`SparseVector` and
:class:`Mask` are immutable value types with validated invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, PreconditionError

NORM_EPS = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Strictly increasing indices with nonzero float64 values over ``[0, dim)``."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"dim must be positive, got {self.dim}")
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != vals.shape:
            raise ValueError("indices and values must have the same length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise DimensionError(f"index out of range for dim {self.dim}")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(vals == 0.0):
                raise ValueError("stored values must be nonzero")
            if not np.all(np.isfinite(vals)):
                raise ValueError("stored values must be finite")
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def empty(cls, dim: int) -> SparseVector:
        return cls(dim, np.empty(0, np.int64), np.empty(0, np.float64))

    @classmethod
    def from_pairs(cls, dim: int, pairs: Sequence[tuple[int, float]]) -> SparseVector:
        pairs = sorted(pairs)
        return cls(dim, [i for i, _ in pairs], [v for _, v in pairs])

    @classmethod
    def from_dense(cls, v) -> SparseVector:
        """All nonzero coordinates of ``v``."""
        v = np.asarray(v, dtype=np.float64)
        idx = np.flatnonzero(v)
        return cls(v.shape[0], idx, v[idx])

    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and self.values.tobytes() == other.values.tobytes()
        )

    def __repr__(self):
        return f"SparseVector(dim={self.dim}, nnz={self.nnz()})"


@dataclass(frozen=True, eq=False)
class Mask:
    """A sorted set of selected coordinates over ``[0, dim)``."""

    dim: int
    selected: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"dim must be positive, got {self.dim}")
        sel = np.unique(np.asarray(self.selected, dtype=np.int64).reshape(-1))
        if sel.size and (sel[0] < 0 or sel[-1] >= self.dim):
            raise DimensionError(f"mask index out of range for dim {self.dim}")
        object.__setattr__(self, "selected", _frozen(sel))

    def __len__(self):
        return int(self.selected.shape[0])

    def as_set(self) -> set[int]:
        return set(self.selected.tolist())

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.selected, other.selected)

    def __repr__(self):
        return f"Mask(dim={self.dim}, size={len(self)})"


def as_dense(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise DimensionError("dense vectors must be 1-D with positive length")
    return v


def _check_dims(a: int, b: int, what: str = "dimension mismatch"):
    if a != b:
        raise DimensionError(f"{what}: {a} != {b}")


def keep_count(rate: float, dim: int) -> int:
    """Number of coordinates kept at compression ``rate``: ``ceil(rate * dim)``."""
    if not 0.0 < rate <= 1.0:
        raise PreconditionError(f"rate must be in (0, 1], got {rate}")
    # guard against 0.1 * 1000 = 100.00000000000001 style round-up
    k = math.ceil(round(rate * dim, 9))
    return max(1, min(dim, k))


def topk_select(v, keep: int) -> Mask:
    """Indices of the ``keep`` largest ``|v[i]|``; ties go to the lower index."""
    v = as_dense(v)
    if not 1 <= keep <= v.shape[0]:
        raise PreconditionError(f"keep must be in [1, {v.shape[0]}], got {keep}")
    return Mask(v.shape[0], kernels.topk_indices(np.abs(v), keep))


def apply_mask(v, m: Mask) -> SparseVector:
    v = as_dense(v)
    _check_dims(v.shape[0], m.dim)
    idx, vals, _ = kernels.split_by_mask(v, m.selected)
    return SparseVector(m.dim, idx, vals)


def complement_mask_zero(v, m: Mask) -> np.ndarray:
    v = as_dense(v)
    _check_dims(v.shape[0], m.dim)
    return kernels.zero_at(v, m.selected)


def split(v, m: Mask) -> tuple[SparseVector, np.ndarray]:
    """``(apply_mask(v, m), complement_mask_zero(v, m))`` in one pass."""
    v = as_dense(v)
    _check_dims(v.shape[0], m.dim)
    idx, vals, rest = kernels.split_by_mask(v, m.selected)
    return SparseVector(m.dim, idx, vals), rest


def normalize(v) -> np.ndarray:
    v = as_dense(v)
    n = float(np.linalg.norm(v))
    if n <= NORM_EPS:
        return v.copy()
    return v / n


def densify(g: SparseVector) -> np.ndarray:
    return g.to_dense()


def sparse_sum_scaled(vs: Sequence[SparseVector], scale: float) -> SparseVector:
    """Sum over the union of supports (summed in list order), then scale."""
    if not vs:
        raise PreconditionError("sparse_sum_scaled needs at least one vector")
    dim = vs[0].dim
    for g in vs[1:]:
        _check_dims(g.dim, dim)
    idx, vals = kernels.sparse_sum(
        [g.indices for g in vs], [g.values for g in vs], dim, float(scale)
    )
    return SparseVector(dim, idx, vals)


def mask_jaccard(a: Mask, b: Mask) -> float:
    return kernels.mean_pairwise_jaccard([a.selected, b.selected])


def mean_mask_jaccard(masks: Sequence[Mask]) -> float:
    """Mean Jaccard index over unordered pairs; 1.0 with fewer than two masks."""
    return float(kernels.mean_pairwise_jaccard([m.selected for m in masks]))
