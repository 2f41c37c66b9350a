"""Cannot-link constrained nonnegative Poisson CP decomposition of count tensors."""

from .evaluation import EvalProtocol, EvalResult, auc, evaluate, train_logreg_l1
from .linkmatrix import Corpus, LiftTable, build_cannot_link, compute_lift
from .metrics import FitStatistics, cannot_link_violation_pct, fit_statistics
from .objective import (
    CannotLinkMatrix,
    HyperParams,
    ObjectiveBreakdown,
    full_objective,
    gradient,
)
from .solver import (
    FitReport,
    SolverAbort,
    SolverConfig,
    fit,
    project_interior_simplex,
    project_simplex,
)
from .synth import SynthSpec, factor_match_score, generate
from .tensor import BiasTerm, KruskalModel, SparseCountTensor

__version__ = "0.1.0"

__all__ = [
    "BiasTerm", "CannotLinkMatrix", "Corpus", "EvalProtocol", "EvalResult",
    "FitReport", "FitStatistics", "HyperParams", "KruskalModel", "LiftTable",
    "ObjectiveBreakdown", "SolverAbort", "SolverConfig", "SparseCountTensor",
    "SynthSpec", "auc", "build_cannot_link", "cannot_link_violation_pct",
    "compute_lift", "evaluate", "factor_match_score", "fit", "fit_statistics",
    "full_objective", "generate", "gradient", "project_interior_simplex",
    "project_simplex", "train_logreg_l1",
]
