import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pigrad import closed_form as cf
from pigrad.dynamics import ControlParams, PdgdState, cbf_field, controlled_field
from pigrad.errors import SingularityError
from pigrad.manifolds import (estimator_manifold, invariance_defect, linear_manifold,
                              manifold_residual, on_manifold_dual, pr_metric,
                              quadratic_manifold, storage, synthesize_control)
from pigrad.problems import ProblemInstance, build_example, quadratic_problem


def _affine(a, b=0.0):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return quadratic_problem(0.5 * np.eye(a.shape[1]), a, np.atleast_1d(b))


def _scalar_problem():
    # f = x^2 / 2, g = x
    return ProblemInstance(name="scalar", n=1, m=1, objective=lambda x: 0.5 * x[0] ** 2,
                           gradient=lambda x: np.array([x[0]]),
                           constraints=lambda x: np.array([x[0]]),
                           jacobian=lambda x: np.array([[1.0]]), mu=1.0)


def test_residual_linear_cases():
    p = _affine([1.0, 0.0])
    x = np.array([0.0, 3.0])
    np.testing.assert_allclose(manifold_residual(linear_manifold(p, 0.001), p, x, [0.5]), [0.5])
    mf = linear_manifold(p, 0.3)
    x = np.array([2.0, 1.0])
    np.testing.assert_allclose(manifold_residual(mf, p, x, on_manifold_dual(mf, x)), [0.0])


def test_residual_quadratic_case():
    p = _affine([1.0, 0.0])
    x = np.array([-5.0, 0.0])
    np.testing.assert_allclose(manifold_residual(quadratic_manifold(p, 0.2), p, x, [1.0]), [0.0])


def test_estimator_residual():
    mf = estimator_manifold(3, 0.5)
    np.testing.assert_allclose(mf.psi(np.array([2.0, 1.0, 3.0])), [0.0, 2.0])


@pytest.mark.parametrize("make", [linear_manifold, quadratic_manifold])
@pytest.mark.parametrize("name", ["convex-penalized", "rosenbrock-disk", "rosenbrock-cubic"])
def test_grad_psi_matches_finite_differences(make, name):
    p = build_example(name)
    mf = make(p, 0.3)
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(10):
        x, lam = rng.uniform(-2, 2, p.n), rng.uniform(0.2, 2, p.m)
        Px, Pl = mf.grad_psi(x, lam)
        fx = np.stack([(mf.psi(x + h * e, lam) - mf.psi(x - h * e, lam)) / (2 * h)
                       for e in np.eye(p.n)], axis=1)
        fl = np.stack([(mf.psi(x, lam + h * e) - mf.psi(x, lam - h * e)) / (2 * h)
                       for e in np.eye(p.m)], axis=1)
        np.testing.assert_allclose(Px, fx, atol=1e-5 * max(1, np.abs(fx).max()))
        np.testing.assert_allclose(Pl, fl, atol=1e-5)


def test_storage_values():
    p = _affine([1.0, 0.0])
    mf = linear_manifold(p, 0.0)
    assert storage(mf, np.zeros(2), [0.5]) == 0.125
    p2 = _affine(np.eye(2), np.zeros(2))
    assert storage(linear_manifold(p2, 0.0), np.zeros(2), [3.0, 4.0]) == 12.5
    mf = linear_manifold(p2, 0.4)
    x = np.array([0.7, -0.2])
    assert storage(mf, x, on_manifold_dual(mf, x)) == 0.0


def test_pr_metric_values():
    p = _affine([1.0, 2.0])
    R = pr_metric(linear_manifold(p, 1.0), np.zeros(2))
    np.testing.assert_allclose(R.m21, [[1.0, 2.0]])
    np.testing.assert_allclose(R.m11, [[1.0, 2.0], [2.0, 4.0]])
    np.testing.assert_allclose(R.m22, [[1.0]])


def test_pr_metric_constant_phi():
    R = pr_metric(linear_manifold(_affine([1.0, 2.0]), 0.0), np.zeros(2))
    np.testing.assert_array_equal(R.m11, np.zeros((2, 2)))
    np.testing.assert_array_equal(R.m21, np.zeros((1, 2)))
    np.testing.assert_array_equal(R.m22, [[1.0]])


@pytest.mark.parametrize("name", ["random-qp", "rosenbrock-disk", "rosenbrock-cubic"])
def test_pr_metric_symmetric_and_degenerate(name):
    p = build_example(name, seed=0)
    mf = linear_manifold(p, 0.5)
    rng = np.random.default_rng(0)
    for _ in range(20):
        R = pr_metric(mf, rng.uniform(-2, 2, p.n))
        np.testing.assert_allclose(R.m12, R.m21.T)
        full = R.full()
        np.testing.assert_allclose(full, full.T)
        assert np.linalg.matrix_rank(full) == p.m < p.n + p.m
        assert abs(np.linalg.det(full)) < 1e-8


def test_synthesize_scalar_example():
    p = _scalar_problem()
    mf = linear_manifold(p, 0.0)
    x, lam = np.array([1.0]), np.array([1.0])
    xdot = -(p.gradient(x) + lam)
    np.testing.assert_allclose(synthesize_control(mf, p, 2.0, x, lam, xdot), [-2.0])


def test_synthesize_on_manifold_drops_decay_term():
    p = build_example("convex-penalized")
    mf = linear_manifold(p, 0.05)
    x = np.array([0.3, 0.1])
    lam = on_manifold_dual(mf, x)
    xdot = np.array([0.2, -0.4])
    expected = -p.constraints(x) - 0.05 * p.jacobian(x) @ xdot
    for alpha in (1.0, 10.0, 100.0):
        np.testing.assert_allclose(synthesize_control(mf, p, alpha, x, lam, xdot), expected,
                                   atol=1e-15)


def test_synthesize_matches_random_qp_law():
    p = build_example("random-qp", seed=0)
    rng = np.random.default_rng(11)
    alpha, k = 10.0, 0.001
    mf = linear_manifold(p, k)
    for _ in range(50):
        x, lam = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 2)
        xdot = -(p.gradient(x) + p.jacobian(x).T @ lam)
        u = synthesize_control(mf, p, alpha, x, lam, xdot)
        assert np.abs(u - cf.random_qp_law(p, alpha, k, x, lam)).max() < 1e-12


def test_synthesize_estimator_form():
    mf = estimator_manifold(3, 0.95, gamma=100.0)
    e = np.array([0.1, -0.3, 0.2])
    u = synthesize_control(mf, None, 10.0, e, None, None)
    np.testing.assert_allclose(u, [0.0, 100 * (-0.3 - 0.095), 100 * (0.2 - 0.095)])


def test_synthesize_rejects_nonpositive_alpha():
    p = build_example("convex-penalized")
    with pytest.raises(ValueError):
        synthesize_control(linear_manifold(p, 0.1), p, 0.0, np.zeros(2), np.zeros(2),
                           np.zeros(2))


def _field(p, mf, cp, cbf=False):
    fn = cbf_field if cbf else controlled_field
    return lambda x, lam: fn(p, mf, cp, PdgdState(x, lam))


@pytest.mark.parametrize("name", ["random-qp", "convex-penalized", "rosenbrock-disk",
                                  "rosenbrock-cubic"])
def test_invariance_defect_linear(name):
    p = build_example(name, seed=0)
    mf = linear_manifold(p, 0.01)
    field = _field(p, mf, ControlParams(alpha=10.0, k=0.01))
    rng = np.random.default_rng(5)
    defects = [invariance_defect(mf, field, rng.uniform(-2, 2, p.n)) for _ in range(100)]
    assert max(defects) < 1e-9


def test_invariance_defect_negative_control():
    p = build_example("random-qp", seed=0)
    mf = linear_manifold(p, 0.01)
    base = _field(p, mf, ControlParams(alpha=10.0, k=0.01))

    def perturbed(x, lam):
        xdot, lamdot = base(x, lam)
        return xdot, lamdot + np.array([1.0, 0.0])

    assert invariance_defect(mf, perturbed, np.array([0.2, 0.3, -0.1])) == pytest.approx(1.0)


@given(st.floats(0.1, 5.0), st.floats(-5, -0.01), st.floats(-1, 1))
@settings(max_examples=40, deadline=None)
def test_invariance_defect_quadratic(k, x1, x2):
    # feasible points only: the positive dual root needs g <= 0
    p = build_example("convex-penalized")
    x = np.array([x1, abs(x2) + max(x1, 0) + 0.1])
    if np.any(p.constraints(x) >= -1e-3):
        return
    mf = quadratic_manifold(p, k)
    assert invariance_defect(mf, _field(p, mf, ControlParams(alpha=10.0, k=k), cbf=True), x) < 1e-9


def test_on_manifold_dual_quadratic_infeasible():
    p = build_example("convex-penalized")
    with pytest.raises(ValueError):
        on_manifold_dual(quadratic_manifold(p, 0.2), np.array([1.0, 0.5]))


def test_cbf_guard():
    p = build_example("convex-penalized")
    mf = quadratic_manifold(p, 0.2)
    with pytest.raises(SingularityError):
        cbf_field(p, mf, ControlParams(alpha=10.0, k=0.2),
                  PdgdState(np.zeros(2), np.array([1e-9, 0.5])))
