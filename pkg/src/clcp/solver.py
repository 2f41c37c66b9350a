"""Alternating projected gradient descent for the cannot-link constrained CP model.

Each outer iteration visits the three factor matrices, then the component
weights, then (optionally) the bias component. Every block update is a
projected gradient step with Armijo backtracking on the full objective, so
the recorded objective never increases.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import objective as obj
from .objective import CannotLinkMatrix, HyperParams, ObjectiveBreakdown
from .tensor import BiasTerm, KruskalModel, SparseCountTensor, sparse_mttkrp

logger = logging.getLogger(__name__)


class SolverAbort(RuntimeError):
    """The objective became non-finite; carries a diagnostic message."""


@dataclass(frozen=True)
class SolverConfig:
    rank: int
    hyper: HyperParams = field(default_factory=HyperParams)
    max_outer_iters: int = 500
    inner_steps_per_mode: int = 1
    tol: float = 1e-6
    seed: int = 0
    armijo_step: float = 1.0
    armijo_shrink: float = 0.5
    armijo_c: float = 1e-4
    armijo_max_backtracks: int = 30
    hard_threshold: float = 0.01
    bias_enabled: bool = True
    bias_frozen: bool = False
    bias_floor: float = 1e-6
    bias_init_fraction: float = 0.1
    scaled_gradient: bool = True
    patience: int = 3

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if not self.armijo_step > 0 or not 0 < self.armijo_c < 1:
            raise ValueError("armijo_step must be positive and armijo_c in (0, 1)")
        if self.hard_threshold < 0:
            raise ValueError("hard_threshold must be >= 0")
        if not self.bias_floor > 0:
            raise ValueError("bias_floor must be positive")
        if self.max_outer_iters < 0 or self.inner_steps_per_mode < 1:
            raise ValueError("iteration counts out of range")


@dataclass
class FitReport:
    model: KruskalModel
    trace: List[ObjectiveBreakdown]
    converged: bool
    iterations: int
    wall_time: float
    final: ObjectiveBreakdown
    degenerate: List[int] = field(default_factory=list)

    @property
    def totals(self) -> np.ndarray:
        return np.array([b.total for b in self.trace])


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` by sort-and-threshold.

    A 2-D input is projected column by column.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 2:
        return np.column_stack([project_simplex(col) for col in v.T]) if v.shape[1] else v.copy()
    return _project_scaled_simplex(v, 1.0)


def _project_scaled_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, n + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    shift = css[rho] / (rho + 1.0)
    return np.maximum(v - shift, 0.0)


def project_interior_simplex(v, floor: float) -> np.ndarray:
    """Euclidean projection onto the simplex with every entry at least ``floor``."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if not floor > 0 or floor * n >= 1:
        raise ValueError(f"floor {floor} infeasible for a length-{n} simplex vector")
    return floor + _project_scaled_simplex(v - floor, 1.0 - n * floor)


def hard_threshold(f, tau: float):
    """Zero entries below ``tau`` and renormalize the surviving columns.

    Returns ``(factor, degenerate)`` where ``degenerate`` flags columns that
    became all-zero.
    """
    f = np.array(f, dtype=np.float64)
    if tau == 0:
        return f, ~np.any(f != 0, axis=0)
    f[f < tau] = 0.0
    sums = f.sum(axis=0)
    degenerate = sums == 0
    f[:, ~degenerate] /= sums[~degenerate]
    return f, degenerate


def initialize(x: SparseCountTensor, cfg: SolverConfig) -> KruskalModel:
    """Random positive factors, equal weights, and a bias shaped like the data marginals."""
    rng = np.random.default_rng(cfg.seed)
    R = int(cfg.rank)
    factors = []
    for dim in x.shape:
        f = 1.0 - rng.random((dim, R))  # uniform on (0, 1]
        factors.append(f / f.sum(axis=0))
    total = float(x.total_sum)
    weights = np.full(R, total / R)
    bias = None
    if cfg.bias_enabled:
        u = []
        for mode, dim in enumerate(x.shape, start=1):
            marg = x.marginal(mode)
            marg = marg / marg.sum() if marg.sum() > 0 else np.full(dim, 1.0 / dim)
            u.append(project_interior_simplex(marg, cfg.bias_floor) if dim > 1 else np.ones(1))
        bias = BiasTerm(cfg.bias_init_fraction * max(total, 1.0), tuple(u))
    return KruskalModel(weights, tuple(factors), bias)


class _Fitter:
    def __init__(self, x, m, cfg):
        self.x = x
        self.m = m if cfg.hyper.beta3 > 0 else None
        self.cfg = cfg
        self.hp = cfg.hyper
        self.steps = {}

    def evaluate(self, model: KruskalModel) -> ObjectiveBreakdown:
        return obj.full_objective(self.x, model, self.m, self.hp, skip_degenerate=True)

    def armijo(self, key, f0, grad, point, direction, build):
        """Backtracking along the projection arc ``build(point + eta * direction)``.

        Returns ``(model, breakdown)`` for the accepted step, or ``None`` if no
        trial step gave sufficient decrease.
        """
        cfg = self.cfg
        if key in self.steps:
            eta = min(self.steps[key] / cfg.armijo_shrink, cfg.armijo_step)
        else:
            eta = cfg.armijo_step
        for _ in range(cfg.armijo_max_backtracks + 1):
            trial_point, model = build(point + eta * direction)
            delta = trial_point - point
            slope = float(np.sum(grad * delta))
            if slope < 0:
                b = self.evaluate(model)
                if not np.isfinite(b.total):
                    eta *= cfg.armijo_shrink
                    continue
                if b.total <= f0 + cfg.armijo_c * slope and b.total <= f0:
                    self.steps[key] = eta
                    return model, b
            eta *= cfg.armijo_shrink
        self.steps[key] = eta
        return None

    def direction(self, point, grad):
        if self.cfg.scaled_gradient:
            return -point * grad
        return -grad

    def factor_step(self, model: KruskalModel, f0: float, mode: int):
        n = mode - 1
        A = model.factors[n]
        lam = model.weights
        W = A * lam
        s = lam
        _, ratio = obj._ratio(self.x, model)
        others = [q for q in range(3) if q != n]
        ones = model.factors[others[0]].sum(axis=0) * model.factors[others[1]].sum(axis=0)
        g_kl = ones - sparse_mttkrp(self.x.indices, ratio, model.factors, mode)
        # penalties depend on the normalized column a_r = w_r / s_r only
        g_pen = obj.penalty_gradient(model, self.m, self.hp, mode, skip_degenerate=True)
        live = s > 0
        safe = np.where(live, s, 1.0)
        g_pen_w = (g_pen - np.sum(A * g_pen, axis=0)) / safe
        grad = g_kl + g_pen_w
        grad[:, ~live] = 0.0

        def build(trial):
            Wn = np.maximum(trial, 0.0)
            sn = Wn.sum(axis=0)
            ok = sn > 0
            An = A.copy()
            An[:, ok] = Wn[:, ok] / sn[ok]
            Wn[:, ~ok] = 0.0
            factors = list(model.factors)
            factors[n] = An
            return Wn, model.replace(weights=np.where(ok, sn, 0.0), factors=tuple(factors))

        return self.armijo(("mode", mode), f0, grad, W, self.direction(W, grad), build)

    def weight_step(self, model: KruskalModel, f0: float):
        grad = obj.gradient_lambda(self.x, model)
        lam = model.weights

        def build(trial):
            ln = np.maximum(trial, 0.0)
            return ln, model.replace(weights=ln)

        return self.armijo("lambda", f0, grad, lam, self.direction(lam, grad), build)

    def bias_steps(self, model: KruskalModel, f0: float):
        floor = self.cfg.bias_floor
        for n in range(3):
            if model.bias.u[n].shape[0] == 1:
                continue
            _, d_u = obj.gradient_bias(self.x, model)
            u = model.bias.u[n]
            g = d_u[n]

            def build(trial, n=n, model=model):
                un = project_interior_simplex(trial, floor)
                us = list(model.bias.u)
                us[n] = un
                return un, model.replace(bias=BiasTerm(model.bias.sigma, tuple(us)))

            res = self.armijo(("u", n), f0, g, u, self.direction(u, g), build)
            if res is not None:
                model, b = res
                f0 = b.total
        d_sigma, _ = obj.gradient_bias(self.x, model)
        sigma = np.array([model.bias.sigma])
        g = np.array([d_sigma])

        def build(trial, model=model):
            sn = np.maximum(trial, floor)
            return sn, model.replace(bias=BiasTerm(float(sn[0]), model.bias.u))

        res = self.armijo("sigma", f0, g, sigma, self.direction(sigma, g), build)
        if res is not None:
            model, b = res
            f0 = b.total
        return model, f0


def fit(x: SparseCountTensor, m: Optional[CannotLinkMatrix], cfg: SolverConfig,
        init: Optional[KruskalModel] = None) -> FitReport:
    """Fit the penalized Poisson CP model to ``x``.

    ``m`` is ignored (and never read) when ``cfg.hyper.beta3 == 0``. The trace
    holds the objective of the initial model followed by one entry per outer
    iteration. Hard thresholding is applied once, after the descent loop, and
    skipped when no iteration ran.
    """
    start = time.perf_counter()
    if cfg.hyper.beta3 > 0:
        if m is None:
            raise ValueError("beta3 > 0 requires a cannot-link matrix")
        if m.dims != (x.shape[1], x.shape[2]):
            raise ValueError(f"cannot-link dims {m.dims} do not match tensor modes 2-3 "
                             f"{(x.shape[1], x.shape[2])}")
    model = initialize(x, cfg) if init is None else init
    if model.shape != x.shape or model.rank != cfg.rank:
        raise ValueError("initial model does not match tensor shape / rank")
    if (model.bias is not None) != cfg.bias_enabled:
        raise ValueError("initial model bias does not match bias_enabled")
    runner = _Fitter(x, m, cfg)
    current = runner.evaluate(model)
    if not np.isfinite(current.total):
        raise SolverAbort(f"non-finite objective at initialization: {current}")
    trace = [current]
    converged = False
    quiet = 0
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        f0 = current.total
        f = f0
        for mode in (1, 2, 3):
            for _ in range(cfg.inner_steps_per_mode):
                res = runner.factor_step(model, f, mode)
                if res is None:
                    break
                model, current = res
                f = current.total
        res = runner.weight_step(model, f)
        if res is not None:
            model, current = res
            f = current.total
        if model.bias is not None and not cfg.bias_frozen:
            model, f = runner.bias_steps(model, f)
            current = runner.evaluate(model)
        if not np.isfinite(current.total):
            raise SolverAbort(f"non-finite objective at outer iteration {it}: {current}")
        trace.append(current)
        rel = abs(f0 - current.total) / max(abs(f0), np.finfo(float).tiny)
        quiet = quiet + 1 if rel < cfg.tol else 0
        if it % 50 == 0:
            logger.debug("iter %d objective %.10g rel change %.3g", it, current.total, rel)
        if quiet >= cfg.patience:
            converged = True
            break
    else:
        it = cfg.max_outer_iters

    # zero iterations hands back the initialization as is, unthresholded
    tau = cfg.hard_threshold if it > 0 else 0.0
    model, degenerate = _apply_threshold(model, tau)
    if degenerate:
        logger.warning("components %s degenerate after thresholding; weights zeroed",
                       degenerate)
    final = runner.evaluate(model)
    return FitReport(
        model=model,
        trace=trace,
        converged=converged,
        iterations=it,
        wall_time=time.perf_counter() - start,
        final=final,
        degenerate=degenerate,
    )


def _apply_threshold(model: KruskalModel, tau: float):
    if tau == 0:
        return model, [int(r) for r in np.flatnonzero(model.degenerate())]
    factors = []
    dead = np.zeros(model.rank, dtype=bool)
    for f in model.factors:
        g, deg = hard_threshold(f, tau)
        factors.append(g)
        dead |= deg
    weights = np.where(dead, 0.0, model.weights)
    return model.replace(weights=weights, factors=tuple(factors)), [
        int(r) for r in np.flatnonzero(dead)
    ]
