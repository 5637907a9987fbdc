import numpy as np
import pytest

from pigrad.errors import DivergenceError, EmptyFeasibleError
from pigrad.oracles import grid_oracle, kkt_residual, projected_gradient_oracle
from pigrad.problems import build_example, quadratic_problem, random_qp

CONVEX_OPT = np.array([0.25, 0.25])


def test_kkt_convex_optimum():
    r = kkt_residual(build_example("convex-penalized"), CONVEX_OPT, [0.375, 0.0])
    assert max(r) < 1e-12


def test_kkt_rosenbrock_minimum():
    r = kkt_residual(build_example("rosenbrock-disk"), np.ones(2), [0.0])
    assert r.stationarity == 0 and r.primal_viol == 0 and r.comp_slack == 0


def test_kkt_infeasible_point():
    assert kkt_residual(build_example("rosenbrock-disk"), [2.0, 2.0], [0.0]).primal_viol > 0


@pytest.mark.parametrize("name", ["rosenbrock-disk", "rosenbrock-cubic"])
def test_grid_rosenbrock(name):
    x = grid_oracle(build_example(name), [(-2, 2), (-2, 2)], 2000)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=2e-3)


def test_grid_convex():
    p = build_example("convex-penalized")
    x = grid_oracle(p, [(-1, 1), (-1, 1)], 2000)
    np.testing.assert_allclose(x, CONVEX_OPT, atol=2e-3)
    assert p.objective(x) == pytest.approx(-0.03125, abs=1e-4)


def test_grid_guards():
    p = build_example("rosenbrock-disk")
    with pytest.raises(EmptyFeasibleError):
        grid_oracle(p, [(5, 6), (5, 6)], 200)
    with pytest.raises(ValueError):
        grid_oracle(random_qp(0), [(-1, 1)] * 3, 200)
    with pytest.raises(ValueError):
        grid_oracle(p, [(-1, 1)] * 2, 10)


def test_projected_gradient_convex():
    x = projected_gradient_oracle(build_example("convex-penalized"), np.zeros(2), 0.1, 10_000)
    np.testing.assert_allclose(x, CONVEX_OPT, atol=1e-6)


def test_projected_gradient_interior_qp():
    p = random_qp(0, placement="interior")
    H = p.extra["W"] + p.extra["W"].T
    x = projected_gradient_oracle(p, np.ones(3) * 0.1, 1.0 / np.linalg.eigvalsh(H)[-1], 10_000)
    np.testing.assert_allclose(x, -np.linalg.solve(H, np.zeros(3)), atol=1e-8)


def test_projected_gradient_divergence():
    # L = 4 along x1, which the constraint on x2 leaves free
    p = quadratic_problem(np.diag([2.0, 1.0]), [[0.0, 1.0]], [100.0])
    L = 4.0
    with pytest.raises(DivergenceError):
        projected_gradient_oracle(p, np.array([1.0, 1.0]), 2.5 / L, 10_000)


def test_oracles_agree_on_convex_example():
    p = build_example("convex-penalized")
    a = grid_oracle(p, [(-1, 1), (-1, 1)], 2000)
    b = projected_gradient_oracle(p, np.zeros(2), 0.1, 10_000)
    assert np.linalg.norm(a - b) < 2 * 2 / 1999


@pytest.mark.parametrize("name, bounds, lam", [
    ("convex-penalized", [(-1, 1), (-1, 1)], None),
    ("rosenbrock-disk", [(-2, 2), (-2, 2)], [0.0]),
    ("rosenbrock-cubic", [(-2, 2), (-2, 2)], [0.0, 0.0]),
])
def test_kkt_at_oracle_optima(name, bounds, lam):
    p = build_example(name)
    if p.affine_data is not None:
        x = projected_gradient_oracle(p, np.zeros(2), 0.1, 10_000)
    else:
        x = np.ones(2) if lam is not None else None
    # active-set multipliers from a least-squares fit on the active constraints
    g = p.constraints(x)
    active = np.abs(g) < 1e-6
    J = p.jacobian(x).reshape(p.m, p.n)
    mult = np.zeros(p.m)
    if active.any():
        mult[active] = np.linalg.lstsq(J[active].T, -p.gradient(x), rcond=None)[0]
    r = kkt_residual(p, x, mult)
    assert r.stationarity < 1e-6
    assert np.all(mult >= -1e-9)
