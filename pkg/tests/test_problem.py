import numpy as np
import pytest

from bundle_extra.problem import (
    LeastSquaresOracle,
    Problem,
    global_optimum_least_squares,
    least_squares_instance,
    smoothness_constant,
    stationarity_residual,
)

from oracles import central_difference


def test_benchmark_configuration_shapes():
    p = least_squares_instance(20, 100, 6, 0)
    assert p.n == 20 and p.dim == 100
    assert all(o.P.shape == (6, 100) for o in p.oracles)
    np.testing.assert_array_equal(p.lower_bounds(), 0.0)


def test_data_moments():
    p = least_squares_instance(50, 200, 20, 1)
    P = np.stack([o.P for o in p.oracles])
    q = np.stack([o.q for o in p.oracles])
    assert P.mean() == pytest.approx(2.0, abs=0.02)
    assert P.var() == pytest.approx(2.0, rel=0.02)
    assert q.mean() == pytest.approx(1.0, abs=0.05)
    assert q.var() == pytest.approx(0.5, rel=0.1)


def test_seed_determinism():
    a, b = least_squares_instance(4, 6, 3, 9), least_squares_instance(4, 6, 3, 9)
    for oa, ob in zip(a.oracles, b.oracles):
        np.testing.assert_array_equal(oa.P, ob.P)
        np.testing.assert_array_equal(oa.q, ob.q)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != least_squares_instance(4, 6, 3, 10).fingerprint()


def test_zero_residual_value():
    rng = np.random.default_rng(0)
    P = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    x = rng.standard_normal(3)
    assert LeastSquaresOracle(P, P @ x, 5).value(x) == 0.0


def test_gradient_finite_differences(rng):
    p = least_squares_instance(3, 7, 4, 2)
    for o in p.oracles:
        x = rng.standard_normal(7)
        fd = central_difference(o.value, x)
        assert np.linalg.norm(fd - o.gradient(x)) <= 1e-6 * np.linalg.norm(fd)


def test_oracle_invariants(rng):
    p = least_squares_instance(5, 8, 4, 3)
    for o in p.oracles:
        for _ in range(20):
            x, y = rng.standard_normal((2, 8)) * 3
            gx = o.gradient(x)
            assert o.value(y) >= o.value(x) + gx @ (y - x) - 1e-10
            assert np.linalg.norm(o.gradient(y) - gx) <= o.smoothness * np.linalg.norm(y - x) * (1 + 1e-12)
        assert all(o.value(x) >= o.lower_bound for x in rng.standard_normal((100, 8)))


def test_stacked_evaluation_matches_per_agent(rng):
    p = least_squares_instance(6, 5, 3, 4)
    X = rng.standard_normal((6, 5))
    vals, grads = p.values_and_gradients(X)
    np.testing.assert_allclose(vals, [o.value(x) for o, x in zip(p.oracles, X)], rtol=1e-13)
    np.testing.assert_allclose(grads, [o.gradient(x) for o, x in zip(p.oracles, X)], rtol=1e-12, atol=1e-14)


def test_optimum_identity_design():
    v = np.array([1.0, -2.0, 0.5])
    p = Problem([LeastSquaresOracle(np.eye(3), v, 1)])
    np.testing.assert_allclose(global_optimum_least_squares(p), v, atol=1e-14)


def test_optimum_two_scalar_agents():
    p = Problem([LeastSquaresOracle([[1.0]], [c], 2) for c in (3.0, -1.0)])
    np.testing.assert_allclose(global_optimum_least_squares(p), [1.0], atol=1e-14)


def test_optimum_rank_deficient():
    P = np.array([[1.0, 1.0], [2.0, 2.0]])
    p = Problem([LeastSquaresOracle(P, [1.0, 2.0], 1)])
    x = global_optimum_least_squares(p)
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_benchmark_optimum_stationary(seed):
    p = least_squares_instance(20, 100, 6, seed)
    x = p.reference_optimum
    scale = 1 + np.linalg.norm(sum(o.scale * o.P.T @ o.q for o in p.oracles))
    assert stationarity_residual(p, x) <= 1e-8 * scale


def test_smoothness_examples():
    assert smoothness_constant(Problem([LeastSquaresOracle(np.eye(4), np.zeros(4), 1)])) == pytest.approx(1.0)
    p = least_squares_instance(4, 6, 3, 0)
    expected = max(np.linalg.eigvalsh(o.P.T @ o.P)[-1] / 4 for o in p.oracles)
    assert p.L == pytest.approx(expected, rel=1e-12)
    doubled = Problem([LeastSquaresOracle(2 * o.P, o.q, 4) for o in p.oracles])
    assert doubled.L == pytest.approx(4 * p.L, rel=1e-12)


def test_mismatched_dimensions_rejected():
    with pytest.raises(ValueError):
        Problem([LeastSquaresOracle(np.eye(2), np.zeros(2)), LeastSquaresOracle(np.eye(3), np.zeros(3))])
