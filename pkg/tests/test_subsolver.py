import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from bundle_extra.subsolver import (
    InnerSolverWarning,
    ProxPWLInstance,
    dual_gradient,
    dual_lipschitz,
    dual_value,
    project_simplex,
    solve,
    solve_batch,
)

from oracles import brute_force_prox_pwl, central_difference, prox_pwl_value, reference_projection


def random_instance(rng, m, d, alpha=None):
    A = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    c = rng.standard_normal(d)
    return ProxPWLInstance(A, b, c, alpha if alpha is not None else float(10 ** rng.uniform(-2, 1)))


def test_single_piece_closed_form():
    inst = ProxPWLInstance(np.array([[1.0, -2.0]]), np.array([0.3]), np.array([0.5, 0.5]), 0.25)
    sol = solve(inst)
    np.testing.assert_array_equal(sol.lam, [1.0])
    np.testing.assert_allclose(sol.x, inst.c - 0.25 * inst.A[0])


def test_absolute_value_prox():
    inst = ProxPWLInstance(np.array([[1.0], [-1.0]]), np.zeros(2), np.zeros(1), 1.0)
    sol = solve(inst)
    assert sol.x[0] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(sol.lam, [0.5, 0.5])


@pytest.mark.parametrize("polish", [True, False])
def test_matches_brute_force_m4_d3(polish):
    rng = np.random.default_rng(0)
    for _ in range(20):
        inst = random_instance(rng, 4, 3)
        x_ref, _, _ = brute_force_prox_pwl(inst.A, inst.b, inst.c, inst.alpha)
        sol = solve(inst, polish=polish)
        assert np.linalg.norm(sol.x - x_ref) <= 1e-6


@pytest.mark.parametrize("v,expected", [((0.5, 0.5), (0.5, 0.5)), ((2, 0), (1, 0)), ((1, 1), (0.5, 0.5))])
def test_projection_examples(v, expected):
    np.testing.assert_allclose(project_simplex(np.array(v, dtype=float)), expected, atol=1e-15)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e3, 1e3)))
def test_projection_matches_reference(v):
    p = project_simplex(v)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(p, reference_projection(v), atol=1e-12)


def test_projection_rowwise():
    V = np.random.default_rng(1).standard_normal((5, 7))
    np.testing.assert_allclose(project_simplex(V), [reference_projection(v) for v in V], atol=1e-12)


def test_dual_vertex_value():
    inst = random_instance(np.random.default_rng(2), 3, 4)
    for j in range(3):
        e = np.eye(3)[j]
        a = inst.A[j]
        assert dual_value(inst, e) == pytest.approx(-inst.alpha / 2 * a @ a + a @ inst.c + inst.b[j])


def test_dual_gradient_finite_differences():
    inst = random_instance(np.random.default_rng(3), 5, 4)
    lam = project_simplex(np.random.default_rng(4).random(5))
    fd = central_difference(lambda l: dual_value(inst, l), lam)
    g = dual_gradient(inst, lam)
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_zero_slopes_pick_largest_intercept():
    inst = ProxPWLInstance(np.zeros((4, 3)), np.array([0.1, 2.0, -1.0, 0.5]), np.ones(3), 0.7)
    sol = solve(inst)
    assert np.argmax(sol.lam) == 1 and sol.lam[1] == pytest.approx(1.0)
    np.testing.assert_allclose(sol.x, np.ones(3))


def test_dual_lipschitz_bounds_centered_curvature():
    inst = random_instance(np.random.default_rng(5), 6, 4, alpha=0.5)
    m = 6
    P = np.eye(m) - np.ones((m, m)) / m
    exact = 0.5 * np.linalg.eigvalsh(P @ inst.A @ inst.A.T @ P)[-1]
    est = dual_lipschitz(inst)
    assert exact * 0.999 <= est <= 0.5 * np.linalg.norm(inst.A, 2) ** 2 * 1.06


def test_certificates_on_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(50):
        inst = random_instance(rng, int(rng.integers(1, 12)), int(rng.integers(1, 30)))
        sol = solve(inst)
        assert sol.converged
        assert np.all(sol.lam >= 0) and abs(sol.lam.sum() - 1) <= 1e-12
        np.testing.assert_array_equal(sol.x, inst.c - inst.alpha * (inst.A.T @ sol.lam))
        h = dual_value(inst, sol.lam)
        primal = prox_pwl_value(inst.A, inst.b, inst.c, inst.alpha, sol.x)
        scale = 1 + abs(h)
        assert primal >= h - 1e-12 * scale
        assert primal - h <= 1e-10 * scale
        vals = inst.A @ sol.x + inst.b
        assert np.all(sol.lam * (vals.max() - vals) <= 1e-10 * scale)


def test_polish_and_plain_agree():
    rng = np.random.default_rng(7)
    for _ in range(30):
        inst = random_instance(rng, 10, 20)
        a, b = solve(inst, polish=True), solve(inst, polish=False, max_iters=100_000)
        assert abs(inst.primal_value(a.x) - inst.primal_value(b.x)) <= 1e-9 * (1 + abs(inst.primal_value(b.x)))


def test_iteration_cap_warns():
    rng = np.random.default_rng(8)
    inst = random_instance(rng, 15, 200, alpha=1.0)
    with pytest.warns(InnerSolverWarning):
        sol = solve(inst, tol=1e-14, max_iters=2, polish=False)
    assert not sol.converged and sol.status != "converged"


def test_batch_matches_individual_solves():
    rng = np.random.default_rng(9)
    n, M, d, alpha = 4, 5, 6, 0.3
    A = rng.standard_normal((n, M, d))
    b = rng.standard_normal((n, M))
    C = rng.standard_normal((n, d))
    active = np.ones((n, M), dtype=bool)
    active[1, 3:] = False
    G = A @ A.transpose(0, 2, 1)
    r = (A @ C[:, :, None])[:, :, 0] + b
    lam, gaps, iters = solve_batch(G, r, active, alpha, np.zeros((n, M)))
    for i in range(n):
        k = active[i].sum()
        sol = solve(ProxPWLInstance(A[i, :k], b[i, :k], C[i], alpha))
        np.testing.assert_allclose(lam[i, :k] @ A[i, :k], sol.lam @ A[i, :k], atol=1e-9)
        assert np.all(lam[i, k:] == 0)


def test_invalid_instances_rejected():
    with pytest.raises(ValueError):
        ProxPWLInstance(np.ones((2, 3)), np.ones(2), np.ones(3), 0.0)
    with pytest.raises(ValueError):
        ProxPWLInstance(np.ones((2, 3)), np.ones(3), np.ones(3), 1.0)
    with pytest.raises(ValueError):
        ProxPWLInstance(np.full((1, 1), np.nan), np.ones(1), np.ones(1), 1.0)
