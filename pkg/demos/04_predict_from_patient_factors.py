#!/usr/bin/env python3
# Use fitted patient loadings as features for an L1 logistic regression.

import numpy as np

from clcp import EvalProtocol, SolverConfig, SynthSpec, evaluate, fit, generate

# Cases are the patients who belong to planted components 0 or 1.
spec = SynthSpec(shape=(200, 30, 20), support=(40, 6, 4), lambda_scale=20_000, seed=0)
truth, counts, _, labels = generate(spec)
print(f"{labels.sum()} cases among {labels.size} patients")

rep = fit(counts, None, SolverConfig(rank=4, seed=0))
features = rep.model.factors[0]

result = evaluate(features, labels, EvalProtocol())
print(f"AUC {result.mean_auc:.3f} (sd {result.std_auc:.3f})")
print("chosen penalties:", [f"{p:.2g}" for p in result.penalties])

# Shuffled labels should score around a coin flip
shuffled = np.random.default_rng(1).permutation(labels)
print(f"shuffled-label AUC {evaluate(features, shuffled).mean_auc:.3f}")
