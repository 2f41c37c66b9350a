"""Penalized Poisson objective for cannot-link constrained CP and its gradients.

The objective is

    sum(z - x log z)                                   (KL / Poisson loss)
  + beta1/2 * sum_d sum_{p<r} max(0, cos(d_p, d_r) - theta_d)^2
  + beta2/2 * sum_r (|a_r|^2 + |b_r|^2 + |c_r|^2)
  + beta3 * trace(B^T M C)

where ``z`` is the model reconstruction (CP part plus bias).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from .tensor import (
    KruskalModel,
    SparseCountTensor,
    dense_sum,
    reconstruct_entries,
    sparse_mttkrp,
)

Z_FLOOR = 1e-10


class DegenerateColumnError(ValueError):
    """A zero-norm column where a cosine is required."""


@dataclass(frozen=True)
class HyperParams:
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    theta: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3"):
            val = float(getattr(self, name))
            if not val >= 0:
                raise ValueError(f"{name} must be nonnegative, got {val}")
            object.__setattr__(self, name, val)
        theta = tuple(float(t) for t in self.theta)
        if len(theta) != 3 or not all(0.0 <= t < 1.0 for t in theta):
            raise ValueError(f"theta must be three values in [0, 1), got {self.theta}")
        object.__setattr__(self, "theta", theta)


class CannotLinkMatrix:
    """Sparse binary matrix of forbidden (row-term, column-term) pairs."""

    def __init__(self, dims, pairs: Iterable = ()):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise ValueError(f"dims must be two positive integers, got {dims}")
        arr = np.array(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                       dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if np.any(arr < 0) or np.any(arr >= np.array(self.dims)):
                raise IndexError(f"cannot-link pair out of bounds for dims {self.dims}")
            arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
            if np.any(np.all(arr[1:] == arr[:-1], axis=1)):
                raise ValueError("duplicate cannot-link pair")
        arr.setflags(write=False)
        self.pairs = arr
        self._csr = None

    def __len__(self):
        return int(self.pairs.shape[0])

    def __eq__(self, other):
        return (
            isinstance(other, CannotLinkMatrix)
            and self.dims == other.dims
            and np.array_equal(self.pairs, other.pairs)
        )

    def __repr__(self):
        return f"CannotLinkMatrix(dims={self.dims}, n_pairs={len(self)})"

    @classmethod
    def empty(cls, dims) -> "CannotLinkMatrix":
        return cls(dims, ())

    def to_sparse(self) -> sp.csr_matrix:
        if self._csr is None:
            data = np.ones(len(self))
            self._csr = sp.csr_matrix(
                (data, (self.pairs[:, 0], self.pairs[:, 1])), shape=self.dims
            )
        return self._csr

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        out[self.pairs[:, 0], self.pairs[:, 1]] = 1.0
        return out


@dataclass(frozen=True)
class ObjectiveBreakdown:
    kl: float
    angular: float
    l2: float
    cannot_link: float

    @property
    def total(self) -> float:
        return self.kl + self.angular + self.l2 + self.cannot_link

    def as_dict(self) -> dict:
        return {
            "kl": self.kl,
            "angular": self.angular,
            "l2": self.l2,
            "cannot_link": self.cannot_link,
            "total": self.total,
        }


def _check_shapes(x: SparseCountTensor, model: KruskalModel) -> None:
    if tuple(x.shape) != model.shape:
        raise ValueError(f"tensor shape {x.shape} does not match model shape {model.shape}")


def _ratio(x: SparseCountTensor, model: KruskalModel):
    """Floored model values and ``x / z`` at the observed entries."""
    z = np.maximum(reconstruct_entries(model, x.indices), Z_FLOOR)
    return z, x.values / z


def kl_loss(x: SparseCountTensor, model: KruskalModel) -> float:
    """``sum(z) - sum_observed x log z``.

    The dense sum of ``z`` is taken in closed form from column sums, which
    reduces to ``sigma + sum(weights)`` on the simplex.
    """
    _check_shapes(x, model)
    total = dense_sum(model)
    if x.nnz == 0:
        return total
    z, _ = _ratio(x, model)
    return total - float(np.dot(x.values, np.log(z)))


def _column_cosines(f: np.ndarray, skip_degenerate: bool):
    norms = np.linalg.norm(f, axis=0)
    live = norms > 0
    if not np.all(live) and not skip_degenerate:
        raise DegenerateColumnError(
            f"zero-norm column(s) {np.flatnonzero(~live).tolist()} in angular penalty"
        )
    safe = np.where(live, norms, 1.0)
    unit = f / safe
    cos = unit.T @ unit
    cos[~live, :] = 0.0
    cos[:, ~live] = 0.0
    return cos, safe, live


def angular_penalty(f: np.ndarray, theta: float, beta1: float,
                    skip_degenerate: bool = False) -> float:
    """``beta1/2 * sum_{p<r} max(0, cos(f_p, f_r) - theta)^2`` over distinct pairs."""
    f = np.asarray(f, dtype=np.float64)
    if beta1 == 0 or f.shape[1] < 2:
        return 0.0
    cos, _, _ = _column_cosines(f, skip_degenerate)
    excess = np.triu(np.maximum(0.0, cos - theta), k=1)
    return 0.5 * beta1 * float(np.sum(excess**2))


def angular_gradient(f: np.ndarray, theta: float, beta1: float,
                     skip_degenerate: bool = False) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    grad = np.zeros_like(f)
    if beta1 == 0 or f.shape[1] < 2:
        return grad
    cos, norms, live = _column_cosines(f, skip_degenerate)
    excess = np.maximum(0.0, cos - theta)
    np.fill_diagonal(excess, 0.0)
    excess[~live, :] = 0.0
    excess[:, ~live] = 0.0
    # d cos(d_p, d_r) / d d_r = d_p / (|d_p||d_r|) - cos * d_r / |d_r|^2
    unit = f / norms
    grad = (unit @ excess - f * (excess * cos).sum(axis=0) / norms) / norms
    return beta1 * grad


def l2_penalty(model: KruskalModel, beta2: float) -> float:
    """``beta2/2`` times the squared Frobenius norms of the three factor matrices."""
    if beta2 == 0:
        return 0.0
    return 0.5 * beta2 * float(sum(np.sum(f**2) for f in model.factors))


def _as_cannot_link(m, dims) -> Optional[CannotLinkMatrix]:
    if m is None:
        return None
    if m.dims != tuple(dims):
        raise ValueError(f"cannot-link dims {m.dims} do not match factor rows {tuple(dims)}")
    return m


def cannot_link_penalty(b: np.ndarray, m: CannotLinkMatrix, c: np.ndarray,
                        beta3: float) -> float:
    """``beta3 * trace(B^T M C)``, summed only over the stored pairs of ``M``."""
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if b.shape[1] != c.shape[1]:
        raise ValueError("B and C have different ranks")
    _as_cannot_link(m, (b.shape[0], c.shape[0]))
    if len(m) == 0:
        return 0.0
    j, k = m.pairs[:, 0], m.pairs[:, 1]
    return float(beta3) * float(np.sum(b[j] * c[k]))


def full_objective(x: SparseCountTensor, model: KruskalModel,
                   m: Optional[CannotLinkMatrix], hp: HyperParams,
                   skip_degenerate: bool = False) -> ObjectiveBreakdown:
    """All four objective terms. ``m`` is never touched when ``beta3 == 0``."""
    kl = kl_loss(x, model)
    ang = sum(
        angular_penalty(f, t, hp.beta1, skip_degenerate)
        for f, t in zip(model.factors, hp.theta)
    )
    l2 = l2_penalty(model, hp.beta2)
    cl = 0.0
    if hp.beta3 > 0 and m is not None:
        _, B, C = model.factors
        cl = cannot_link_penalty(B, m, C, hp.beta3)
    return ObjectiveBreakdown(kl=float(kl), angular=float(ang), l2=float(l2),
                              cannot_link=float(cl))


def kl_gradient(x: SparseCountTensor, model: KruskalModel, mode: int,
                ratio: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of the KL term with respect to one factor matrix."""
    n = mode - 1
    if ratio is None:
        _, ratio = _ratio(x, model)
    others = [q for q in range(3) if q != n]
    colsums = model.factors[others[0]].sum(axis=0) * model.factors[others[1]].sum(axis=0)
    phi = sparse_mttkrp(x.indices, ratio, model.factors, mode)
    return model.weights * (colsums - phi)


def cannot_link_gradient(model: KruskalModel, m: Optional[CannotLinkMatrix],
                         beta3: float, mode: int) -> np.ndarray:
    grad = np.zeros_like(model.factors[mode - 1])
    if mode == 1 or beta3 == 0 or m is None or len(m) == 0:
        return grad
    _, B, C = model.factors
    M = _as_cannot_link(m, (B.shape[0], C.shape[0])).to_sparse()
    if mode == 2:
        return beta3 * np.asarray(M @ C)
    return beta3 * np.asarray(M.T @ B)


def gradient(x: SparseCountTensor, model: KruskalModel,
             m: Optional[CannotLinkMatrix], hp: HyperParams, mode: int,
             skip_degenerate: bool = False, ratio=None) -> np.ndarray:
    """Gradient of :func:`full_objective` with respect to factor matrix ``mode``."""
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    _check_shapes(x, model)
    return kl_gradient(x, model, mode, ratio) + penalty_gradient(
        model, m, hp, mode, skip_degenerate)


def penalty_gradient(model: KruskalModel, m: Optional[CannotLinkMatrix],
                     hp: HyperParams, mode: int, skip_degenerate: bool = False) -> np.ndarray:
    """Gradient of the angular, l2 and cannot-link terms for one factor matrix."""
    f = model.factors[mode - 1]
    grad = angular_gradient(f, hp.theta[mode - 1], hp.beta1, skip_degenerate)
    if hp.beta2:
        grad = grad + hp.beta2 * f
    if hp.beta3:
        grad = grad + cannot_link_gradient(model, m, hp.beta3, mode)
    return grad


def gradient_lambda(x: SparseCountTensor, model: KruskalModel, ratio=None) -> np.ndarray:
    """Gradient with respect to the component weights (only the KL term depends on them)."""
    _check_shapes(x, model)
    if ratio is None:
        _, ratio = _ratio(x, model)
    A, B, C = model.factors
    idx = x.indices
    ones = A.sum(axis=0) * B.sum(axis=0) * C.sum(axis=0)
    if x.nnz == 0:
        return ones
    return ones - ratio @ (A[idx[:, 0]] * B[idx[:, 1]] * C[idx[:, 2]])


def gradient_bias(x: SparseCountTensor, model: KruskalModel, ratio=None):
    """Gradient with respect to ``(sigma, u1, u2, u3)`` of the bias component."""
    _check_shapes(x, model)
    if model.bias is None:
        raise ValueError("model has no bias term")
    if ratio is None:
        _, ratio = _ratio(x, model)
    sigma = model.bias.sigma
    u = model.bias.u
    sums = [v.sum() for v in u]
    idx = x.indices
    picked = [u[n][idx[:, n]] for n in range(3)]
    d_sigma = float(np.prod(sums) - np.dot(ratio, picked[0] * picked[1] * picked[2]))
    d_u = []
    for n in range(3):
        a, b = [q for q in range(3) if q != n]
        w = ratio * picked[a] * picked[b]
        phi = np.bincount(idx[:, n], weights=w, minlength=u[n].shape[0])
        d_u.append(sigma * (sums[a] * sums[b] - phi))
    return d_sigma, tuple(d_u)
