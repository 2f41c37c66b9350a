"""How large beta3 must be before the cannot-link term moves a fit.

Not an acceptance test. The KL term is measured in raw counts: letting a
component explain a stray background count saves several KL units, while
the cannot-link cost of the loadings involved is about 0.1 * beta3. On the
default synthetic data the effect therefore appears only once beta3 is in
the hundreds to thousands.
"""

import pytest

from clcp.metrics import cannot_link_violation_pct, fit_statistics
from clcp.objective import HyperParams
from clcp.solver import SolverConfig, fit
from clcp.synth import SynthSpec, generate

GRID = (0.0, 10.0, 100.0, 1000.0, 10000.0)


@pytest.fixture(scope="module")
def sweep():
    _, x, links, _ = generate(SynthSpec(seed=0))
    rows = []
    for beta3 in GRID:
        rep = fit(x, links, SolverConfig(rank=6, hyper=HyperParams(beta3=beta3)))
        rows.append((cannot_link_violation_pct(rep.model, links, 0.01),
                     fit_statistics(x, rep.model, 0.01).avg_nonzeros))
    return rows


def test_count_scale_beta3_removes_violations(sweep):
    first, last = sweep[0][0], sweep[-1][0]
    assert first > 0
    assert last <= 0.2 * first


def test_count_scale_beta3_sparsifies(sweep):
    base, strongest = sweep[0][1], sweep[-1][1]
    assert strongest[1] <= base[1] and strongest[2] <= base[2]
