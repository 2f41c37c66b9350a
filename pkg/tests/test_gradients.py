import numpy as np
import pytest

from clcp import objective as obj
from clcp.objective import HyperParams
from clcp.tensor import KruskalModel, SparseCountTensor
from oracles import (
    central_difference,
    gradient_errors,
    gradient_instance,
    random_model,
    random_tensor,
    relative_error,
)


@pytest.mark.parametrize("seed", range(6))
def test_all_terms_match_finite_differences(seed):
    errors = gradient_errors(*gradient_instance(np.random.default_rng(100 + seed)))
    worst = max(errors, key=errors.get)
    assert errors[worst] < 1e-5, f"{worst}: {errors[worst]:.2e}"


def test_kl_gradient_vanishes_at_exact_fit():
    # x/z = 1 on a dense 2x2x2 support: every (1 - x/z) weight is zero
    rng = np.random.default_rng(5)
    fs = tuple((f := rng.uniform(0.2, 1, (2, 1))) / f.sum() for _ in range(3))
    model = KruskalModel(np.array([50.0]), fs)
    idx = np.argwhere(np.ones((2, 2, 2)))
    support = SparseCountTensor((2, 2, 2), idx, np.ones(len(idx), dtype=np.int64))
    for mode in (1, 2, 3):
        g = obj.kl_gradient(support, model, mode, ratio=np.ones(len(idx)))
        np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_full_gradient_small_instance():
    rng = np.random.default_rng(21)
    model = random_model(rng, (3, 3, 2), 2, low=0.1)
    x, _ = random_tensor(rng, (3, 3, 2))
    m = obj.CannotLinkMatrix((3, 2), [(0, 1), (2, 0)])
    hp = HyperParams(beta1=1.0, beta2=0.5, beta3=2.0, theta=(0.1, 0.1, 0.1))
    for mode in (1, 2, 3):
        def f(G, n=mode - 1):
            fs = list(model.factors)
            fs[n] = G
            return obj.full_objective(x, model.replace(factors=tuple(fs)), m, hp).total
        fd = central_difference(f, model.factors[mode - 1])
        assert relative_error(obj.gradient(x, model, m, hp, mode), fd) < 1e-5


def test_gradient_rejects_bad_mode():
    rng = np.random.default_rng(0)
    x, model, m, hp = gradient_instance(rng)
    with pytest.raises(ValueError):
        obj.gradient(x, model, m, hp, 4)
