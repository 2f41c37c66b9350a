#!/usr/bin/env python3
# Plant four sparse components in a count tensor, fit them back, and see how close we get.

import numpy as np

from clcp import SolverConfig, SynthSpec, factor_match_score, fit, generate

spec = SynthSpec(shape=(40, 30, 20), rank=4, seed=0)
truth, counts, links, labels = generate(spec)
print(f"tensor {counts.shape}, {counts.nnz} nonzero cells, {counts.total_sum} counts")

# Plain Poisson CP: no penalties, just the bias component soaking up background noise
report = fit(counts, None, SolverConfig(rank=4, seed=0))
print(f"converged={report.converged} after {report.iterations} outer iterations")
print(f"objective {report.totals[0]:.1f} -> {report.totals[-1]:.1f}")

score = factor_match_score(truth, report.model)
print(f"factor match score vs planted truth: {score:.3f}")

# Each fitted column should land on the planted support
_, B, C = report.model.factors
_, B_true, C_true = truth.factors
for r in range(4):
    fitted = np.flatnonzero(B[:, r]).tolist()
    best = max(range(4), key=lambda q: len(set(fitted) & set(np.flatnonzero(B_true[:, q]))))
    print(f"component {r}: diagnosis rows {fitted}  planted {np.flatnonzero(B_true[:, best]).tolist()}")

# Seeds that land in a worse local minimum do exist; a quick scan:
for seed in range(6, 10):
    t, x, _, _ = generate(SynthSpec(seed=seed))
    s = factor_match_score(t, fit(x, None, SolverConfig(rank=4, seed=seed)).model)
    print(f"seed {seed}: match {s:.3f}")
