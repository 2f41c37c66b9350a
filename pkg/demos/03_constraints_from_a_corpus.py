#!/usr/bin/env python3
# From a document corpus to cannot-link pairs to a constrained fit, all in memory.

import numpy as np

from clcp import HyperParams, SolverConfig, build_cannot_link, compute_lift, fit, generate
from clcp.cli import phenotype_listing
from clcp.synth import SynthSpec, synthetic_corpus, vocab_names

truth, counts, _, _ = generate(SynthSpec(seed=1))

# Documents mention terms from one planted component each, plus a little noise.
corpus = synthetic_corpus(truth, n_docs=400, seed=1, noise=0.1)
table = compute_lift(corpus)
print(f"{corpus.n_docs} documents; lift defined for {table.defined.mean():.0%} of pairs")

# lift < 1 means the two terms co-occur less than chance would predict
links = build_cannot_link(table, alpha=1.0)
print(f"{len(links)} cannot-link pairs at alpha=1")
for alpha in (0.5, 1.0, 2.0):
    print(f"  alpha={alpha}: {len(build_cannot_link(table, alpha))} pairs")

lift = table.lift
print("highest-lift pairs:")
for flat in np.argsort(np.nan_to_num(lift, nan=-1).ravel())[::-1][:5]:
    j, k = np.unravel_index(flat, lift.shape)
    print(f"  {corpus.vocab_rows[j]} + {corpus.vocab_cols[k]}: {lift[j, k]:.2f}")

rep = fit(counts, links, SolverConfig(rank=4, hyper=HyperParams(beta1=1.0, beta3=1000.0)))
rows, cols = vocab_names(counts.shape)
print(phenotype_listing(rep.model, rows, cols, top=5))
