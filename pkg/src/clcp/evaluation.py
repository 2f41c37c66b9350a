"""Prediction harness: L1 logistic regression on patient factor loadings, scored by AUC."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit
from scipy.stats import rankdata
from sklearn.model_selection import KFold, StratifiedKFold, StratifiedShuffleSplit

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(np.logspace(-4, 1, 8))


def _check_labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError("labels must be a vector")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("labels contain a single class")
    return y.astype(np.float64)


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative; ties count one half."""
    y = _check_labels(labels)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    ranks = rankdata(s)
    n_pos = y.sum()
    n_neg = y.size - n_pos
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _logistic_loss(X, y, w, b):
    margin = X @ w + b
    # -[y log p + (1-y) log(1-p)] with p = sigmoid(margin)
    return -float(np.mean(y * log_expit(margin) + (1 - y) * log_expit(-margin)))


def logreg_l1_objective(X, y, w, b, penalty) -> float:
    return _logistic_loss(X, y, w, b) + penalty * float(np.abs(w).sum())


def train_logreg_l1(features, labels, penalty: float, tol: float = 1e-8,
                    max_iter: int = 10_000, init=None):
    """Mean logistic loss plus ``penalty * |w|_1`` (intercept unpenalized).

    Solved by proximal gradient with a diagonal metric (per-coordinate
    curvature bounds) and backtracking on a global step multiplier. Returns
    ``(w, intercept)``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = _check_labels(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be an (n, d) matrix matching labels")
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    n, d = X.shape
    # coordinate curvature bounds of the mean logistic loss
    curv = np.maximum((X**2).mean(axis=0) / 4.0, 1e-12)
    if init is None:
        w = np.zeros(d)
        p = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        b = float(np.log(p / (1 - p)))
    else:
        w, b = np.array(init[0], dtype=np.float64), float(init[1])
    obj = logreg_l1_objective(X, y, w, b, penalty)
    t = 1.0
    for _ in range(max_iter):
        resid = expit(X @ w + b) - y
        gw = X.T @ resid / n
        gb = float(resid.mean())
        loss0 = _logistic_loss(X, y, w, b)
        while True:
            step = t / curv
            z = w - step * gw
            w_new = np.sign(z) * np.maximum(np.abs(z) - step * penalty, 0.0)
            b_new = b - t * 4.0 * gb
            dw, db = w_new - w, b_new - b
            quad = loss0 + gw @ dw + gb * db + 0.5 / t * (curv @ dw**2 + db**2 / 4.0)
            if _logistic_loss(X, y, w_new, b_new) <= quad + 1e-15 or t < 1e-12:
                break
            t *= 0.5
        new_obj = logreg_l1_objective(X, y, w_new, b_new, penalty)
        w, b = w_new, b_new
        done = abs(obj - new_obj) < tol
        obj = new_obj
        if done:
            break
        t = min(t * 2.0, 1.0)
    return w, b


@dataclass(frozen=True)
class EvalProtocol:
    n_splits: int = 5
    test_fraction: float = 0.2
    cv_folds: int = 10
    lasso_grid: tuple = DEFAULT_GRID
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.cv_folds < 2 or self.n_splits < 1:
            raise ValueError("need cv_folds >= 2 and n_splits >= 1")
        if not self.lasso_grid or min(self.lasso_grid) <= 0:
            raise ValueError("lasso_grid must be non-empty and positive")


@dataclass
class EvalResult:
    mean_auc: float
    std_auc: float
    split_aucs: list = field(default_factory=list)
    penalties: list = field(default_factory=list)
    splits: list = field(default_factory=list)


def _folds(y, n_folds, seed):
    minority = int(min(y.sum(), y.size - y.sum()))
    if minority >= n_folds:
        return StratifiedKFold(n_folds, shuffle=True, random_state=seed).split(y, y)
    return KFold(n_folds, shuffle=True, random_state=seed).split(y)


def select_penalty(X, y, protocol: EvalProtocol, seed: int) -> float:
    """Penalty with the best mean validation AUC; ties go to the larger penalty."""
    grid = sorted(protocol.lasso_grid, reverse=True)
    totals = np.zeros(len(grid))
    used = 0
    for n, (tr, va) in enumerate(_folds(y, protocol.cv_folds, seed)):
        if y[tr].min() == y[tr].max() or y[va].min() == y[va].max():
            warnings.warn(f"CV fold {n} has a single class; skipped", RuntimeWarning)
            continue
        used += 1
        init = None
        for g, pen in enumerate(grid):
            # warm start along the decreasing penalty path
            w, b = train_logreg_l1(X[tr], y[tr], pen, init=init)
            init = (w, b)
            totals[g] += auc(X[va] @ w + b, y[va])
    if used == 0:
        raise ValueError("every cross-validation fold was single-class")
    return float(grid[int(np.argmax(totals))])


def evaluate(features, labels, protocol: EvalProtocol = EvalProtocol()) -> EvalResult:
    """Repeated stratified train/test splits with CV-selected L1 penalty."""
    X = np.asarray(features, dtype=np.float64)
    y = _check_labels(labels)
    if X.shape[0] != y.shape[0]:
        raise ValueError("features and labels differ in length")
    splitter = StratifiedShuffleSplit(
        n_splits=protocol.n_splits, test_size=protocol.test_fraction,
        random_state=protocol.seed,
    )
    result = EvalResult(mean_auc=np.nan, std_auc=np.nan)
    for s, (train, test) in enumerate(splitter.split(X, y)):
        pen = select_penalty(X[train], y[train], protocol, protocol.seed + 1000 + s)
        w, b = train_logreg_l1(X[train], y[train], pen)
        score = auc(X[test] @ w + b, y[test])
        logger.info("split %d: penalty %.3g test AUC %.4f", s, pen, score)
        result.split_aucs.append(score)
        result.penalties.append(pen)
        result.splits.append((train, test))
    aucs = np.array(result.split_aucs)
    result.mean_auc = float(aucs.mean())
    result.std_auc = float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0
    return result
