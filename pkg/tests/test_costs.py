import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_diff, ksupport_norm_cvx, ksupport_prox_cvx, numeric_prox
from sparseot import CostModel, cost_matrix, grad_tau, h_value, k_support_norm, prox_tau
from sparseot.costs import CostFamily

FAMILIES = [
    CostModel.sqeuclidean(),
    CostModel.elastic_l1(0.7),
    CostModel.elastic_stvs(0.7),
    CostModel.elastic_ksupport(0.7, 2),
]
vectors = arrays(np.float64, st.integers(2, 6), elements=st.floats(-10, 10))


# -- h_value ----------------------------------------------------------------


def test_h_sqeuclidean_zero():
    assert h_value(CostModel.sqeuclidean(), np.zeros(3)) == 0.0


def test_h_elastic_l1():
    assert h_value(CostModel.elastic_l1(1.0), [3.0, -4.0]) == pytest.approx(19.5, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.01, 1.0, 50.0])
def test_h_stvs_zero(gamma):
    assert h_value(CostModel.elastic_stvs(gamma), np.zeros(4)) == 0.0


def test_h_ksupport_full_group_is_l2():
    assert h_value(CostModel.elastic_ksupport(2.0, 2), [3.0, 4.0]) == pytest.approx(37.5, abs=1e-12)


def test_h_rejects_nonfinite_and_large_k():
    with pytest.raises(ValueError):
        h_value(CostModel.elastic_l1(1.0), [np.nan, 1.0])
    with pytest.raises(ValueError):
        h_value(CostModel.elastic_ksupport(1.0, 3), [1.0, 2.0])


def test_cost_model_validation():
    with pytest.raises(ValueError):
        CostModel.elastic_l1(-1.0)
    with pytest.raises(ValueError):
        CostModel(CostFamily.KSUPPORT, 1.0)
    assert CostModel.from_dict(CostModel.elastic_ksupport(0.3, 2).to_dict()) == \
        CostModel.elastic_ksupport(0.3, 2)


@pytest.mark.parametrize("cost", FAMILIES, ids=lambda c: c.family.value)
@given(z=vectors)
@settings(max_examples=50, deadline=None)
def test_tau_nonnegative_and_even(cost, z):
    if cost.family is CostFamily.KSUPPORT and z.size < cost.k:
        return
    tau = float(cost.tau(z))
    assert tau >= 0.0
    assert float(cost.tau(-z)) == pytest.approx(tau, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("cost", FAMILIES, ids=lambda c: c.family.value)
def test_tau_vanishes_at_zero(cost):
    assert float(cost.tau(np.zeros(4))) == 0.0


# -- grad_tau ---------------------------------------------------------------


def test_grad_l1_sign():
    np.testing.assert_array_equal(grad_tau(CostModel.elastic_l1(2.0), [3.0, -1.0]), [2.0, -2.0])


def test_grad_l1_sign_zero_convention():
    np.testing.assert_array_equal(grad_tau(CostModel.elastic_l1(2.0), [0.0, 5.0]), [0.0, 2.0])


def test_grad_sqeuclidean_is_zero(rng):
    np.testing.assert_array_equal(grad_tau(CostModel.sqeuclidean(), rng.normal(size=5)), 0.0)


@pytest.mark.parametrize(
    "cost",
    [CostModel.elastic_stvs(0.3), CostModel.elastic_stvs(2.0),
     CostModel.elastic_ksupport(0.8, 1), CostModel.elastic_ksupport(0.8, 3),
     CostModel.elastic_l1(1.3)],
    ids=lambda c: c.label(),
)
def test_grad_tau_matches_finite_differences(cost, rng):
    worst = 0.0
    for _ in range(50):
        z = rng.normal(scale=2.0, size=5)
        fd = central_diff(lambda v: float(cost.tau(v)), z, step=1e-6)
        g = cost.grad_tau(z)
        worst = max(worst, np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g))))
    assert worst < 1e-5


@pytest.mark.parametrize("fam", [CostFamily.L1, CostFamily.STVS, CostFamily.KSUPPORT])
def test_gamma_zero_collapses_to_sqeuclidean(fam, rng):
    cost = CostModel(fam, 0.0, 2 if fam is CostFamily.KSUPPORT else None)
    w = rng.normal(size=4)
    np.testing.assert_array_equal(cost.prox_tau(w), w)
    np.testing.assert_array_equal(cost.grad_tau(w), 0.0)
    assert float(cost.h(w)) == pytest.approx(0.5 * w @ w, abs=1e-15)


# -- prox_tau ---------------------------------------------------------------


def test_soft_threshold_example():
    np.testing.assert_allclose(prox_tau(CostModel.elastic_l1(1.0), [3.0, -0.5, 0.0]), [2.0, 0.0, 0.0])


def test_stvs_examples():
    assert prox_tau(CostModel.elastic_stvs(1.0), [2.0])[0] == pytest.approx(1.5, abs=1e-15)
    assert prox_tau(CostModel.elastic_stvs(1.0), [0.5])[0] == 0.0


@pytest.mark.parametrize("cost", FAMILIES, ids=lambda c: c.family.value)
def test_prox_of_zero_is_zero(cost):
    out = cost.prox_tau(np.zeros(3))
    np.testing.assert_array_equal(out, 0.0)
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize(
    "cost",
    [CostModel.elastic_l1(0.8), CostModel.elastic_stvs(0.8), CostModel.elastic_ksupport(0.8, 2)],
    ids=lambda c: c.family.value,
)
def test_prox_matches_numeric_minimizer(cost, rng):
    for _ in range(30):
        d = int(rng.integers(2, 5))
        w = rng.normal(scale=2.0, size=d)
        expected = numeric_prox(cost.tau, w)
        np.testing.assert_allclose(cost.prox_tau(w), expected, atol=1e-4)


def test_ksupport_prox_matches_conic_program(rng):
    for _ in range(10):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(1, d + 1))
        gamma = float(rng.uniform(0.1, 3.0))
        w = rng.normal(scale=2.0, size=d)
        np.testing.assert_allclose(
            CostModel.elastic_ksupport(gamma, k).prox_tau(w), ksupport_prox_cvx(w, k, gamma),
            atol=1e-4,
        )


@pytest.mark.parametrize(
    "cost", [CostModel.elastic_l1(0.6), CostModel.elastic_ksupport(0.6, 2)],
    ids=lambda c: c.family.value,
)
@given(a=arrays(np.float64, 4, elements=st.floats(-5, 5)),
       b=arrays(np.float64, 4, elements=st.floats(-5, 5)))
@settings(max_examples=100, deadline=None)
def test_convex_prox_is_nonexpansive(cost, a, b):
    gap = np.linalg.norm(cost.prox_tau(a) - cost.prox_tau(b))
    assert gap <= np.linalg.norm(a - b) + 1e-9


@given(w=arrays(np.float64, 6, elements=st.floats(-20, 20)), gamma=st.floats(0.01, 5.0))
@settings(max_examples=100, deadline=None)
def test_stvs_shrinks_less_than_soft_threshold(w, gamma):
    st_ = CostModel.elastic_l1(gamma).prox_tau(w)
    stvs = CostModel.elastic_stvs(gamma).prox_tau(w)
    big = np.abs(w) >= gamma
    assert np.all(np.abs(stvs - w)[big] <= np.abs(st_ - w)[big] + 1e-12)


@pytest.mark.parametrize("cost", FAMILIES[1:], ids=lambda c: c.family.value)
def test_prox_inverts_grad_h(cost, rng):
    # grad h* o grad h = identity on points of differentiability
    for _ in range(20):
        z = rng.normal(size=5)
        np.testing.assert_allclose(cost.prox_tau(cost.grad_h(z)), z, atol=1e-10)


# -- k_support_norm ---------------------------------------------------------


def test_ksupport_norm_examples():
    assert k_support_norm([3.0, -4.0], 1) == pytest.approx(7.0, abs=1e-12)
    assert k_support_norm([3.0, -4.0], 2) == pytest.approx(5.0, abs=1e-12)
    for k in (1, 2, 3):
        assert k_support_norm([0.0, -2.5, 0.0], k) == pytest.approx(2.5, abs=1e-12)


def test_ksupport_norm_rejects_bad_k():
    with pytest.raises(ValueError):
        k_support_norm([1.0, 2.0], 0)
    with pytest.raises(ValueError):
        k_support_norm([1.0, 2.0], 3)


def test_ksupport_norm_endpoints(rng):
    for _ in range(100):
        d = int(rng.integers(1, 9))
        z = rng.normal(size=d)
        assert k_support_norm(z, 1) == pytest.approx(np.abs(z).sum(), abs=1e-10)
        assert k_support_norm(z, d) == pytest.approx(np.linalg.norm(z), abs=1e-10)


def test_ksupport_norm_matches_group_definition(rng):
    for _ in range(15):
        d = int(rng.integers(2, 6))
        k = int(rng.integers(1, d + 1))
        z = rng.normal(size=d)
        assert k_support_norm(z, k) == pytest.approx(ksupport_norm_cvx(z, k), abs=1e-5)


def test_ksupport_norm_split_case():
    # sorted (10, 4, 3, 3), k = 3: the l1 block starts at the second entry
    assert k_support_norm([3.0, 10.0, -3.0, 4.0], 3) ** 2 == pytest.approx(150.0, abs=1e-10)


@given(z=arrays(np.float64, 5, elements=st.floats(-10, 10)), k=st.integers(1, 5),
       perm=st.permutations(range(5)))
@settings(max_examples=100, deadline=None)
def test_ksupport_norm_permutation_and_sign_invariant(z, k, perm):
    base = k_support_norm(z, k)
    assert k_support_norm(z[list(perm)], k) == pytest.approx(base, rel=1e-12, abs=1e-12)
    assert k_support_norm(np.abs(z), k) == pytest.approx(base, rel=1e-12, abs=1e-12)


# -- cost_matrix ------------------------------------------------------------


def test_cost_matrix_examples():
    assert cost_matrix([[1.0, 2.0]], [[1.0, 2.0]], CostModel.elastic_l1(3.0)).tolist() == [[0.0]]
    np.testing.assert_allclose(cost_matrix([[0.0, 0.0]], [[3.0, 4.0]], CostModel.sqeuclidean()), [[12.5]])
    np.testing.assert_allclose(cost_matrix([[0.0, 0.0]], [[3.0, 4.0]], CostModel.elastic_l1(1.0)), [[19.5]])


def test_cost_matrix_dimension_mismatch():
    with pytest.raises(ValueError):
        cost_matrix(np.zeros((2, 3)), np.zeros((2, 4)), CostModel.sqeuclidean())


@pytest.mark.parametrize("cost", FAMILIES, ids=lambda c: c.family.value)
def test_cost_matrix_entrywise(cost, rng):
    X, Y = rng.normal(size=(7, 4)), rng.normal(size=(5, 4))
    C = cost_matrix(X, Y, cost)
    for i in range(7):
        for j in range(5):
            assert C[i, j] == pytest.approx(float(cost.h(X[i] - Y[j])), rel=1e-13)
