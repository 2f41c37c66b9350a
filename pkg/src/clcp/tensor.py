"""Sparse count tensors and Kruskal models with an optional bias component.

All three-mode; indices are 0-based and ``mode`` arguments are 1, 2 or 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-8


def _frozen(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class NormalizationError(ValueError):
    """A factor column or bias vector is not on the probability simplex."""


@dataclass(frozen=True)
class SparseCountTensor:
    """Three-mode nonnegative count tensor in coordinate form.

    Entries are stored sorted lexicographically by ``(i, j, k)``. Duplicate
    coordinates are rejected rather than summed.
    """

    shape: tuple
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"shape must be three positive integers, got {self.shape}")
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(self.values)
        if vals.size and not np.all(np.asarray(vals) == np.round(vals)):
            raise ValueError("counts must be integers")
        vals = vals.astype(np.int64).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise ValueError("indices and values differ in length")
        if vals.size:
            if np.any(vals < 1):
                raise ValueError("stored counts must be >= 1 (zeros are implicit)")
            if np.any(idx < 0) or np.any(idx >= np.array(shape)):
                raise IndexError("entry index out of bounds for shape %s" % (shape,))
        order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        idx, vals = idx[order], vals[order]
        if idx.shape[0] > 1:
            dup = np.all(idx[1:] == idx[:-1], axis=1)
            if np.any(dup):
                first = idx[1:][dup][0]
                raise ValueError(f"duplicate coordinate {tuple(int(v) for v in first)}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", _frozen(idx, np.int64))
        object.__setattr__(self, "values", _frozen(vals, np.int64))

    @classmethod
    def from_entries(cls, shape, entries: Iterable[Sequence[int]]) -> "SparseCountTensor":
        """Build from an iterable of ``(i, j, k, count)`` tuples."""
        rows = [tuple(e) for e in entries]
        if not rows:
            return cls(shape, np.zeros((0, 3), np.int64), np.zeros(0, np.int64))
        arr = np.array(rows)
        return cls(shape, arr[:, :3], arr[:, 3])

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def total_sum(self) -> int:
        return int(self.values.sum())

    def marginal(self, mode: int) -> np.ndarray:
        """Sum of counts along every mode except ``mode``."""
        n = _check_mode(mode)
        return np.bincount(
            self.indices[:, n], weights=self.values, minlength=self.shape[n]
        ).astype(np.float64)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=np.int64)
        if self.nnz:
            dense[tuple(self.indices.T)] = self.values
        return dense


@dataclass(frozen=True)
class BiasTerm:
    """Strictly positive rank-one background ``sigma * u1 o u2 o u3``."""

    sigma: float
    u: tuple

    def __post_init__(self):
        if len(self.u) != 3:
            raise ValueError("bias needs three vectors")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "u", tuple(_frozen(v).reshape(-1) for v in self.u))

    @property
    def shape(self) -> tuple:
        return tuple(v.shape[0] for v in self.u)

    def check_feasible(self, tol: float = NORMALIZATION_TOL) -> None:
        if not self.sigma > 0:
            raise NormalizationError(f"bias weight must be positive, got {self.sigma}")
        for n, v in enumerate(self.u, start=1):
            if np.any(v <= 0):
                raise NormalizationError(f"bias vector {n} has non-positive entries")
            if abs(v.sum() - 1.0) > tol:
                raise NormalizationError(f"bias vector {n} sums to {v.sum()!r}, not 1")


def degenerate_columns(factor: np.ndarray) -> np.ndarray:
    """Boolean mask of all-zero columns."""
    return ~np.any(np.asarray(factor) != 0, axis=0)


@dataclass(frozen=True)
class KruskalModel:
    """``[[sigma; u1; u2; u3]] + [[weights; A; B; C]]``.

    Construction only checks shapes. Normalization is a property of fitted
    models (see :meth:`is_normalized`), not of every point where the
    objective and its gradients are evaluated.
    """

    weights: np.ndarray
    factors: tuple
    bias: Optional[BiasTerm] = None

    def __post_init__(self):
        if len(self.factors) != 3:
            raise ValueError("a three-mode model needs exactly three factor matrices")
        factors = tuple(_frozen(np.atleast_2d(f)) for f in self.factors)
        weights = _frozen(self.weights).reshape(-1)
        rank = weights.shape[0]
        for n, f in enumerate(factors, start=1):
            if f.ndim != 2 or f.shape[1] != rank:
                raise ValueError(
                    f"factor {n} has shape {f.shape}; expected rank {rank} columns"
                )
        if self.bias is not None and self.bias.shape != tuple(f.shape[0] for f in factors):
            raise ValueError(f"bias shape {self.bias.shape} does not match factors")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "factors", factors)

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def degenerate(self) -> np.ndarray:
        """Components whose column is all-zero in any mode."""
        mask = np.zeros(self.rank, dtype=bool)
        for f in self.factors:
            mask |= degenerate_columns(f)
        return mask

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        try:
            self.check_normalized(tol)
        except NormalizationError:
            return False
        return True

    def check_normalized(self, tol: float = NORMALIZATION_TOL) -> None:
        for n, f in enumerate(self.factors, start=1):
            if np.any(f < 0):
                raise NormalizationError(f"factor {n} has negative entries")
            sums = f.sum(axis=0)
            bad = (np.abs(sums - 1.0) > tol) & (sums != 0)
            if np.any(bad):
                r = int(np.flatnonzero(bad)[0])
                raise NormalizationError(f"factor {n} column {r} sums to {sums[r]!r}")
        if np.any(self.weights < 0):
            raise NormalizationError("negative component weight")
        if self.bias is not None:
            self.bias.check_feasible(tol)

    def replace(self, weights=None, factors=None, bias=...) -> "KruskalModel":
        return KruskalModel(
            self.weights if weights is None else weights,
            self.factors if factors is None else factors,
            self.bias if bias is ... else bias,
        )

    def to_dense(self) -> np.ndarray:
        A, B, C = self.factors
        full = np.einsum("r,ir,jr,kr->ijk", self.weights, A, B, C)
        if self.bias is not None:
            u1, u2, u3 = self.bias.u
            full = full + self.bias.sigma * np.einsum("i,j,k->ijk", u1, u2, u3)
        return full


def _check_mode(mode) -> int:
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    return int(mode) - 1


def reconstruct_at(model: KruskalModel, index) -> float:
    """Model value ``z_ijk`` at a single coordinate."""
    i, j, k = (int(v) for v in index)
    for pos, dim in zip((i, j, k), model.shape):
        if not 0 <= pos < dim:
            raise IndexError(f"index {index} out of bounds for shape {model.shape}")
    A, B, C = model.factors
    z = float(np.dot(model.weights, A[i] * B[j] * C[k]))
    if model.bias is not None:
        u1, u2, u3 = model.bias.u
        z += model.bias.sigma * u1[i] * u2[j] * u3[k]
    return z


def reconstruct_entries(model: KruskalModel, indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`reconstruct_at` over an ``(n, 3)`` index array."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    A, B, C = model.factors
    z = (A[idx[:, 0]] * B[idx[:, 1]] * C[idx[:, 2]]) @ model.weights
    if model.bias is not None:
        u1, u2, u3 = model.bias.u
        z = z + model.bias.sigma * u1[idx[:, 0]] * u2[idx[:, 1]] * u3[idx[:, 2]]
    return z


def model_total_sum(model: KruskalModel) -> float:
    """Sum of every model entry, ``sigma + sum(weights)`` for a normalized model."""
    model.check_normalized()
    live = ~model.degenerate()
    total = float(model.weights[live].sum())
    if model.bias is not None:
        total += model.bias.sigma
    return total


def dense_sum(model: KruskalModel) -> float:
    """Sum of every model entry without assuming normalization.

    Uses products of column sums, so it is exact for any factors and costs
    O(R * (I1 + I2 + I3)).
    """
    A, B, C = model.factors
    total = float(model.weights @ (A.sum(axis=0) * B.sum(axis=0) * C.sum(axis=0)))
    if model.bias is not None:
        total += model.bias.sigma * float(np.prod([v.sum() for v in model.bias.u]))
    return total


def mttkrp(weights_at_entries, model: KruskalModel, mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product over listed entries.

    ``weights_at_entries`` is a sequence of ``(i, j, k, w)`` rows. For mode 1
    the result is ``G[i, r] = sum w * B[j, r] * C[k, r]``; modes 2 and 3 are
    the cyclic analogues.
    """
    _check_mode(mode)
    arr = np.asarray(weights_at_entries, dtype=np.float64).reshape(-1, 4)
    idx = arr[:, :3].astype(np.int64)
    return sparse_mttkrp(idx, arr[:, 3], model.factors, mode)


def sparse_mttkrp(indices: np.ndarray, w: np.ndarray, factors, mode: int) -> np.ndarray:
    """Array form of :func:`mttkrp`, taking indices and weights separately."""
    n = _check_mode(mode)
    others = [m for m in range(3) if m != n]
    rows = factors[n].shape[0]
    rank = factors[0].shape[1]
    out = np.zeros((rows, rank))
    if indices.shape[0] == 0:
        return out
    if np.any(indices < 0) or np.any(indices >= np.array([f.shape[0] for f in factors])):
        raise IndexError("entry index out of bounds")
    prod = w[:, None] * factors[others[0]][indices[:, others[0]]] * factors[others[1]][
        indices[:, others[1]]
    ]
    target = indices[:, n]
    # bincount sums in entry order, so results are deterministic
    for r in range(rank):
        out[:, r] = np.bincount(target, weights=prod[:, r], minlength=rows)
    return out
