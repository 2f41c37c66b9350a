import math

import numpy as np
import pytest

from clcp.objective import (
    CannotLinkMatrix,
    DegenerateColumnError,
    HyperParams,
    angular_penalty,
    cannot_link_gradient,
    cannot_link_penalty,
    full_objective,
    kl_loss,
    l2_penalty,
)
from clcp.tensor import KruskalModel, SparseCountTensor
from oracles import angular_oracle, cannot_link_oracle, kl_oracle, random_model, random_tensor


def test_kl_single_entry():
    one = np.ones((1, 1))
    model = KruskalModel(np.array([2.0]), (one, one, one))
    x = SparseCountTensor.from_entries((1, 1, 1), [(0, 0, 0, 2)])
    assert kl_loss(x, model) == pytest.approx(2 - 2 * math.log(2), abs=1e-14)
    assert kl_loss(x, model) == pytest.approx(0.61371, abs=1e-5)


def test_kl_empty_tensor_is_total_sum():
    rng = np.random.default_rng(0)
    model = random_model(rng, (2, 2, 2), 2, bias=False)
    model = model.replace(weights=np.array([1.0, 2.0]))
    x = SparseCountTensor.from_entries((2, 2, 2), [])
    assert kl_loss(x, model) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_kl_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, (3, 3, 2), 2)
    x, dense = random_tensor(rng, (3, 3, 2))
    assert kl_loss(x, model) == pytest.approx(kl_oracle(dense, model), abs=1e-10)


def test_angular_examples():
    same = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert angular_penalty(same, 0.5, 1.0) == pytest.approx(0.125)
    assert angular_penalty(np.eye(2), 0.0, 3.0) == 0.0
    f = np.array([[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    # both e_0 and e_1 meet [.5,.5] at cos = 1/sqrt(2); e_0 . e_1 = 0
    expected = 2 * (1 / math.sqrt(2) - 0.2) ** 2
    assert angular_penalty(f, 0.2, 2.0) == pytest.approx(expected, abs=1e-14)
    assert angular_penalty(f, 0.2, 2.0) == pytest.approx(angular_oracle(f, 0.2, 2.0), abs=1e-14)


def test_angular_zero_column():
    f = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateColumnError):
        angular_penalty(f, 0.0, 1.0)
    assert angular_penalty(f, 0.0, 1.0, skip_degenerate=True) == 0.0


def test_l2_examples():
    model = KruskalModel(np.array([1.0]), (np.array([[1.0], [0.0]]), np.array([[0.5], [0.5]]),
                                           np.array([[1.0]])))
    assert l2_penalty(model, 2.0) == pytest.approx(2.5)
    assert l2_penalty(model, 0.0) == 0.0
    rng = np.random.default_rng(3)
    model = random_model(rng, (4, 3, 5), 3)
    expected = 0.7 / 2 * sum(float(v) ** 2 for f in model.factors for v in f.ravel())
    assert l2_penalty(model, 0.7) == pytest.approx(expected, rel=1e-13)


def test_cannot_link_examples():
    b = np.zeros((3, 1)); b[1, 0] = 1
    c = np.zeros((2, 1)); c[0, 0] = 1
    assert cannot_link_penalty(b, CannotLinkMatrix((3, 2), [(1, 0)]), c, 2.0) == 2.0
    rng = np.random.default_rng(1)
    assert cannot_link_penalty(rng.random((3, 2)), CannotLinkMatrix.empty((3, 2)),
                               rng.random((2, 2)), 5.0) == 0.0


def test_cannot_link_matches_triple_loop():
    rng = np.random.default_rng(7)
    b, c = rng.random((4, 3)), rng.random((5, 3))
    pairs = rng.choice(20, size=6, replace=False)
    m = CannotLinkMatrix((4, 5), [(p // 5, p % 5) for p in pairs])
    assert cannot_link_penalty(b, m, c, 1.3) == pytest.approx(
        cannot_link_oracle(b, m.to_dense(), c, 1.3), abs=1e-12)


def test_cannot_link_gradient_structure():
    B = np.full((2, 2), 0.5)
    C = np.array([[1.0, 0.0], [0.0, 1.0]])
    model = KruskalModel(np.ones(2), (np.full((1, 2), 1.0), B, C))
    g = cannot_link_gradient(model, CannotLinkMatrix((2, 2), [(0, 0)]), 3.0, 2)
    np.testing.assert_array_equal(g, [[3.0, 0.0], [0.0, 0.0]])


def test_cannot_link_matrix_validation():
    with pytest.raises(ValueError, match="duplicate"):
        CannotLinkMatrix((2, 2), [(0, 1), (0, 1)])
    with pytest.raises(IndexError):
        CannotLinkMatrix((2, 2), [(2, 0)])
    m = CannotLinkMatrix((3, 3), [(2, 1), (0, 2)])
    assert m.pairs.tolist() == [[0, 2], [2, 1]]


def test_full_objective_parts():
    rng = np.random.default_rng(11)
    model = random_model(rng, (3, 4, 3), 3)
    x, dense = random_tensor(rng, (3, 4, 3))
    m = CannotLinkMatrix((4, 3), [(0, 0), (1, 2), (3, 1)])
    assert full_objective(x, model, m, HyperParams()).total == kl_loss(x, model)
    hp = HyperParams(beta1=0.5, beta2=1.5, beta3=2.0, theta=(0.1, 0.2, 0.3))
    parts = full_objective(x, model, m, hp)
    expected = (kl_oracle(dense, model)
                + sum(angular_oracle(f, t, 0.5) for f, t in zip(model.factors, hp.theta))
                + 0.75 * sum(float(np.sum(f**2)) for f in model.factors)
                + cannot_link_oracle(model.factors[1], m.to_dense(), model.factors[2], 2.0))
    assert parts.total == pytest.approx(expected, abs=1e-10)
    # with beta3 = 0 the cannot-link matrix is never consulted
    granite = full_objective(x, model, "not a matrix", HyperParams(beta1=0.5, beta2=1.5,
                                                                    theta=hp.theta))
    assert granite.cannot_link == 0.0
    assert granite.total == pytest.approx(parts.total - parts.cannot_link, abs=1e-12)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        HyperParams(beta1=-1.0)
    with pytest.raises(ValueError):
        HyperParams(theta=(0.0, 1.5, 0.0))


def test_kl_floor_applies_without_bias():
    one = np.ones((1, 1))
    zero_b = np.array([[1.0], [0.0]])
    model = KruskalModel(np.array([1.0]), (one, zero_b, one))
    x = SparseCountTensor.from_entries((1, 2, 1), [(0, 1, 0, 3)])
    assert np.isfinite(kl_loss(x, model))
    assert kl_loss(x, model) == pytest.approx(1.0 - 3 * math.log(1e-10))


def test_angular_scale_invariant_and_zero_iff_below_theta():
    rng = np.random.default_rng(2)
    for _ in range(20):
        f = rng.random((5, 4))
        theta = float(rng.uniform(0, 0.9))
        scaled = f * rng.uniform(0.1, 10, size=4)
        assert angular_penalty(scaled, theta, 1.0) == pytest.approx(
            angular_penalty(f, theta, 1.0), rel=1e-12, abs=1e-15)
        unit = f / np.linalg.norm(f, axis=0)
        cos = (unit.T @ unit)[np.triu_indices(4, 1)]
        assert (angular_penalty(f, theta, 1.0) == 0.0) == bool(np.all(cos <= theta))


def test_cannot_link_bilinear_and_zero_iff_no_cosupport():
    rng = np.random.default_rng(4)
    for _ in range(20):
        b = rng.random((4, 3)) * (rng.random((4, 3)) < 0.4)
        c = rng.random((5, 3)) * (rng.random((5, 3)) < 0.4)
        pairs = [(j, k) for j in range(4) for k in range(5) if rng.random() < 0.3]
        m = CannotLinkMatrix((4, 5), pairs)
        val = cannot_link_penalty(b, m, c, 1.0)
        assert val >= 0
        assert cannot_link_penalty(2 * b, m, c, 1.0) == pytest.approx(2 * val)
        hit = any(b[j, r] > 0 and c[k, r] > 0 for j, k in pairs for r in range(3))
        assert (val == 0.0) == (not hit)


@pytest.mark.parametrize("count", [1, 3, 17])
def test_kl_single_cell_minimized_at_count(count):
    x = SparseCountTensor.from_entries((1, 1, 1), [(0, 0, 0, count)])
    one = np.ones((1, 1))
    zs = np.linspace(0.2 * count, 3.0 * count, 281)
    values = [kl_loss(x, KruskalModel(np.array([z]), (one, one, one))) for z in zs]
    assert zs[int(np.argmin(values))] == pytest.approx(count, abs=zs[1] - zs[0])
    at = kl_loss(x, KruskalModel(np.array([float(count)]), (one, one, one)))
    assert at <= min(values) + 1e-12
