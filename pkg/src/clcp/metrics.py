"""Fit quality, sparsity, diversity and cannot-link violation statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import CannotLinkMatrix, kl_loss
from .tensor import KruskalModel, SparseCountTensor


@dataclass(frozen=True)
class FitStatistics:
    kl_divergence: float
    avg_nonzeros: tuple
    avg_cosine: tuple
    max_cosine: tuple

    def as_dict(self) -> dict:
        out = {"kl_divergence": self.kl_divergence}
        for name in ("avg_nonzeros", "avg_cosine", "max_cosine"):
            for mode, val in enumerate(getattr(self, name), start=1):
                out[f"{name}_{mode}"] = val
        return out


def pairwise_cosines(f: np.ndarray) -> np.ndarray:
    """Cosines of all distinct column pairs (upper triangle, row-major order).

    Zero columns have cosine 0 with everything.
    """
    f = np.asarray(f, dtype=np.float64)
    norms = np.linalg.norm(f, axis=0)
    unit = f / np.where(norms > 0, norms, 1.0)
    cos = unit.T @ unit
    rows, cols = np.triu_indices(f.shape[1], k=1)
    return cos[rows, cols]


def fit_statistics(x: SparseCountTensor, model: KruskalModel, tau: float) -> FitStatistics:
    """KL divergence, mean column support (entries > tau) and mean/max pairwise cosine."""
    nonzeros, avg_cos, max_cos = [], [], []
    for f in model.factors:
        nonzeros.append(float(np.mean(np.sum(f > tau, axis=0))))
        cos = pairwise_cosines(f)
        avg_cos.append(float(cos.mean()) if cos.size else 0.0)
        max_cos.append(float(cos.max()) if cos.size else 0.0)
    return FitStatistics(
        kl_divergence=kl_loss(x, model),
        avg_nonzeros=tuple(nonzeros),
        avg_cosine=tuple(avg_cos),
        max_cosine=tuple(max_cos),
    )


def violated_pairs(model: KruskalModel, m: CannotLinkMatrix, tau: float) -> np.ndarray:
    """Boolean mask over ``m.pairs``: both terms exceed ``tau`` in some component."""
    _, B, C = model.factors
    if m.dims != (B.shape[0], C.shape[0]):
        raise ValueError(f"cannot-link dims {m.dims} do not match model modes 2-3 "
                         f"{(B.shape[0], C.shape[0])}")
    if len(m) == 0:
        return np.zeros(0, dtype=bool)
    j, k = m.pairs[:, 0], m.pairs[:, 1]
    return np.any((B[j] > tau) & (C[k] > tau), axis=1)


def cannot_link_violation_pct(model: KruskalModel, m: CannotLinkMatrix, tau: float) -> float:
    """Percentage of cannot-link pairs that co-occur within at least one component."""
    hits = violated_pairs(model, m, tau)
    if hits.size == 0:
        return 0.0
    return 100.0 * float(hits.sum()) / hits.size
