"""Planted sparse Poisson CP models for recovery and constraint experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linkmatrix import Corpus
from .objective import CannotLinkMatrix
from .tensor import BiasTerm, KruskalModel, SparseCountTensor

Z_CUTOFF = 1e-8


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic dataset.

    ``support`` is the number of nonzero entries per column in each mode.
    ``lambda_scale`` is the expected count mass of every planted component;
    the bias weight is ``bias_fraction * rank * lambda_scale``. A fraction
    ``cannot_link_fraction`` of the (row, column) pairs that never share a
    planted component become cannot-link pairs. Patients loading above
    ``label_threshold`` on any of ``label_components`` are labelled 1.
    """

    shape: tuple = (40, 30, 20)
    rank: int = 4
    support: tuple = (10, 6, 4)
    lambda_scale: float = 2000.0
    bias_fraction: float = 0.05
    cannot_link_fraction: float = 0.5
    label_components: tuple = (0, 1)
    label_threshold: float = 0.0
    seed: int = 0

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        support = tuple(int(s) for s in self.support)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"invalid shape {self.shape}")
        if len(support) != 3 or any(not 1 <= s <= d for s, d in zip(support, shape)):
            raise ValueError(f"support sizes {self.support} must lie in [1, mode dim]")
        if int(self.rank) < 1:
            raise ValueError("rank must be >= 1")
        for name in ("bias_fraction", "cannot_link_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.lambda_scale < 0:
            raise ValueError("lambda_scale must be >= 0")
        if any(not 0 <= c < self.rank for c in self.label_components):
            raise ValueError("label component out of range")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "support", support)


def planted_model(spec: SynthSpec, rng: np.random.Generator) -> KruskalModel:
    factors = []
    for dim, size in zip(spec.shape, spec.support):
        f = np.zeros((dim, spec.rank))
        for r in range(spec.rank):
            rows = rng.choice(dim, size=size, replace=False)
            f[rows, r] = rng.uniform(0.5, 1.5, size=size)
        factors.append(f / f.sum(axis=0))
    weights = np.full(spec.rank, float(spec.lambda_scale))
    sigma = spec.bias_fraction * spec.rank * spec.lambda_scale
    bias = None
    if sigma > 0:
        bias = BiasTerm(sigma, tuple(rng.dirichlet(np.full(d, 5.0)) for d in spec.shape))
    return KruskalModel(weights, tuple(factors), bias)


def sample_counts(model: KruskalModel, rng: np.random.Generator) -> SparseCountTensor:
    """Elementwise Poisson draw from ``model`` without densifying the bias."""
    A, B, C = model.factors
    counts = {}
    support = set()
    for r in range(model.rank):
        if model.weights[r] <= 0:
            continue
        ii, jj, kk = (np.flatnonzero(f[:, r] > 0) for f in (A, B, C))
        for idx in np.stack(np.meshgrid(ii, jj, kk, indexing="ij"), -1).reshape(-1, 3):
            support.add(tuple(int(v) for v in idx))
    if support:
        idx = np.array(sorted(support), dtype=np.int64)
        z = (A[idx[:, 0]] * B[idx[:, 1]] * C[idx[:, 2]]) @ model.weights
        keep = z > Z_CUTOFF
        idx, z = idx[keep], z[keep]
        draws = rng.poisson(z)
        for pos, n in zip(map(tuple, idx[draws > 0]), draws[draws > 0]):
            counts[pos] = counts.get(pos, 0) + int(n)
    if model.bias is not None:
        # Poisson total, then multinomial placement == independent Poisson per cell
        total = rng.poisson(model.bias.sigma)
        picks = [rng.choice(len(u), size=total, p=u / u.sum()) for u in model.bias.u]
        for pos in zip(*picks):
            key = tuple(int(v) for v in pos)
            counts[key] = counts.get(key, 0) + 1
    keys = sorted(counts)
    entries = [(i, j, k, counts[(i, j, k)]) for i, j, k in keys]
    return SparseCountTensor.from_entries(model.shape, entries)


def consistent_cannot_link(model: KruskalModel, fraction: float,
                           rng: np.random.Generator) -> CannotLinkMatrix:
    """Random share of the (j, k) pairs that never co-occur in a planted component."""
    _, B, C = model.factors
    joint = (B > 0).astype(int) @ (C > 0).astype(int).T
    candidates = np.argwhere(joint == 0)
    n_pick = int(round(fraction * len(candidates)))
    chosen = np.sort(rng.choice(len(candidates), size=n_pick, replace=False))
    return CannotLinkMatrix((B.shape[0], C.shape[0]), candidates[chosen])


def generate(spec: SynthSpec):
    """Return ``(truth, tensor, cannot_link, labels)``, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    truth = planted_model(spec, rng)
    tensor = sample_counts(truth, rng)
    links = consistent_cannot_link(truth, spec.cannot_link_fraction, rng)
    A = truth.factors[0]
    comps = list(spec.label_components)
    if comps:
        labels = (A[:, comps] > spec.label_threshold).any(axis=1).astype(np.int64)
    else:
        labels = np.zeros(spec.shape[0], dtype=np.int64)
    return truth, tensor, links, labels


def _unit_columns(f: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(f, axis=0)
    return f / np.where(norms > 0, norms, 1.0)


def factor_match_score(truth: KruskalModel, fitted: KruskalModel) -> float:
    """Mean over matched components of the product of per-mode column cosines.

    Components are matched by an optimal assignment, so the score is
    invariant to how the fitted components are ordered.
    """
    if truth.rank != fitted.rank:
        raise ValueError(f"rank mismatch: {truth.rank} vs {fitted.rank}")
    if truth.shape != fitted.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {fitted.shape}")
    score = np.ones((truth.rank, fitted.rank))
    for ft, ff in zip(truth.factors, fitted.factors):
        score *= _unit_columns(ft).T @ _unit_columns(ff)
    rows, cols = linear_sum_assignment(score, maximize=True)
    return float(score[rows, cols].mean())


def vocab_names(shape) -> tuple:
    """Opaque labels for the row (mode 2) and column (mode 3) vocabularies."""
    return (tuple(f"dx{j:04d}" for j in range(shape[1])),
            tuple(f"rx{k:04d}" for k in range(shape[2])))


def synthetic_corpus(truth: KruskalModel, n_docs: int, seed: int = 0,
                     terms_per_side: int = 2, noise: float = 0.1) -> Corpus:
    """Documents that mention terms from one planted component each.

    Every document draws a component (proportional to its weight), then up to
    ``terms_per_side`` row and column terms from that component's loadings.
    With probability ``noise`` one uniformly random term of each vocabulary
    is added, so unrelated pairs co-occur occasionally.
    """
    rng = np.random.default_rng(seed)
    _, B, C = truth.factors
    rows, cols = vocab_names(truth.shape)
    w = np.asarray(truth.weights, dtype=np.float64)
    p_comp = w / w.sum() if w.sum() > 0 else np.full(truth.rank, 1.0 / truth.rank)
    docs = []
    for _ in range(n_docs):
        r = rng.choice(truth.rank, p=p_comp)
        doc = set()
        for f, names in ((B, rows), (C, cols)):
            col = f[:, r]
            if col.sum() > 0:
                k = min(terms_per_side, int(np.count_nonzero(col)))
                picks = rng.choice(len(names), size=k, replace=False, p=col / col.sum())
                doc.update(names[i] for i in picks)
            if rng.random() < noise:
                doc.add(names[rng.integers(len(names))])
        docs.append(doc)
    return Corpus(rows, cols, tuple(docs))
