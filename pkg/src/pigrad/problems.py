"""Constrained problem definitions and the worked example builders.

A problem is ``min f(x)  s.t.  g(x) <= 0`` with ``g: R^n -> R^m``.  The
constraint Jacobian ``jacobian(x)`` is always ``m x n`` and the dual coupling
term in the Lagrangian gradient is ``jacobian(x).T @ lam``.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, IndefiniteHessianError, UnknownExampleError

EXAMPLES = ("random-qp", "convex-penalized", "rosenbrock-disk", "rosenbrock-cubic")

FD_STEP = 1e-6


@dataclass(frozen=True)
class ProblemInstance:
    """Objective, constraints and their derivatives for one problem.

    ``hessian`` may be ``None``; callers then fall back to central
    differences of ``gradient``.  ``affine_data`` is ``(A, b)`` when the
    constraints are ``A x - b``.  ``extra`` carries builder-specific matrices
    (``W``, ``F``) used by the closed-form control laws.
    """

    name: str
    n: int
    m: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    mu: float = 0.0
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    affine_data: Optional[tuple] = None
    extra: Optional[dict] = None

    def check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(
                f"{self.name}: expected x of shape ({self.n},), got {x.shape}")
        return x


@dataclass(frozen=True)
class FeasibleSet:
    """The set ``{x : g(x) <= 0}``.

    For affine problems the rows are halfspaces ``A[i] @ x <= b[i]``;
    otherwise only the smooth constraint map is available.
    """

    constraints: Callable[[np.ndarray], np.ndarray]
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    @property
    def is_polyhedral(self):
        return self.A is not None

    def contains(self, x, tol=0.0):
        return bool(np.all(self.constraints(np.asarray(x, dtype=float)) <= tol))

    @classmethod
    def from_halfspaces(cls, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(constraints=lambda x: A @ x - b, A=A, b=b)


def feasible_set(p: ProblemInstance) -> FeasibleSet:
    if p.affine_data is not None:
        A, b = p.affine_data
        return FeasibleSet(constraints=p.constraints, A=A, b=b)
    return FeasibleSet(constraints=p.constraints)


def eval_problem(p: ProblemInstance, x):
    """Return ``(f, grad, g, jac)`` at ``x``."""
    x = p.check_x(x)
    return (float(p.objective(x)), np.asarray(p.gradient(x), dtype=float),
            np.asarray(p.constraints(x), dtype=float),
            np.asarray(p.jacobian(x), dtype=float).reshape(p.m, p.n))


def _central_jacobian(fun, x, h):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def finite_diff_check(p: ProblemInstance, x, h=FD_STEP):
    """Largest scaled error between analytic and central-difference derivatives.

    Each component error is divided by ``max(1, |analytic|, |numeric|)`` so
    the measure is relative for large entries and absolute near zero.
    """
    x = p.check_x(x)
    fd_grad = _central_jacobian(lambda z: np.array([p.objective(z)]), x, h)[0]
    grad = np.asarray(p.gradient(x), dtype=float)
    errs = [np.abs(grad - fd_grad) / np.maximum(1.0, np.maximum(np.abs(grad), np.abs(fd_grad)))]
    if p.m:
        fd_jac = _central_jacobian(p.constraints, x, h)
        jac = np.asarray(p.jacobian(x), dtype=float).reshape(p.m, p.n)
        errs.append((np.abs(jac - fd_jac)
                     / np.maximum(1.0, np.maximum(np.abs(jac), np.abs(fd_jac)))).ravel())
    return float(max(e.max() for e in errs))


def hessian_at(p: ProblemInstance, x, h=FD_STEP):
    x = p.check_x(x)
    if p.hessian is not None:
        return np.asarray(p.hessian(x), dtype=float)
    H = _central_jacobian(p.gradient, x, h)
    return 0.5 * (H + H.T)


def hessian_condition_number(p: ProblemInstance, x):
    """Spectral condition number ``lambda_max / lambda_min`` of the Hessian."""
    eig = np.linalg.eigvalsh(hessian_at(p, x))
    if eig[0] <= 0:
        raise IndefiniteHessianError(
            f"Hessian of {p.name} at {x} has eigenvalue {eig[0]:.3g} <= 0")
    return float(eig[-1] / eig[0])


def stability_margin(p: ProblemInstance, k):
    """``mu - k * q2`` with ``q2`` the largest eigenvalue of ``A^T A``.

    Positive values certify exponential stability of the on-manifold target
    dynamics for affine constraints.
    """
    if p.affine_data is None:
        raise ValueError(f"{p.name}: stability margin needs affine constraints")
    A, _ = p.affine_data
    q2 = np.linalg.eigvalsh(A.T @ A)[-1]
    return float(p.mu - k * q2)


# -- builders -----------------------------------------------------------------

def quadratic_problem(W, A, b, F=None, name="quadratic"):
    """``f(x) = x^T W x + F x`` subject to ``A x <= b``."""
    W = np.asarray(W, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n, m = W.shape[0], A.shape[0]
    F = np.zeros(n) if F is None else np.asarray(F, dtype=float).reshape(-1)
    H = W + W.T

    # objective and constraints also accept a batch of points as columns
    def objective(x):
        val = np.einsum("i...,ij,j...->...", x, W, x) + F @ x
        return float(val) if np.ndim(val) == 0 else val

    def constraints(x):
        return A @ x - (b if np.ndim(x) == 1 else b[:, None])

    return ProblemInstance(
        name=name, n=n, m=m,
        objective=objective,
        gradient=lambda x: H @ x + F,
        constraints=constraints,
        jacobian=lambda x: A,
        mu=float(np.linalg.eigvalsh(H)[0]),
        hessian=None,
        affine_data=(A, b),
        extra={"W": W, "F": F},
    )


def random_qp(seed, n=3, m=2, placement=None, min_eig=0.1):
    """Gaussian random QP ``x^T W x`` s.t. ``A x <= b``.

    ``W`` is symmetrised and shifted so its smallest eigenvalue is at least
    ``min_eig``.  ``placement`` optionally moves ``b`` so that the
    unconstrained minimiser (the origin) is strictly inside (``"interior"``)
    or strictly outside (``"boundary"``) the feasible set.
    """
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    W = 0.5 * (G + G.T)
    lo = np.linalg.eigvalsh(W)[0]
    if lo < min_eig:
        W = W + (min_eig - lo) * np.eye(n)
    if placement == "interior":
        b = np.abs(b) + 0.5
    elif placement == "boundary":
        b = -(np.abs(b) + 0.5)
    elif placement is not None:
        raise ValueError(f"unknown placement {placement!r}")
    suffix = f"-{placement}" if placement else ""
    return quadratic_problem(W, A, b, name=f"random-qp{suffix}[seed={seed}]")


def convex_penalized():
    W = np.diag([0.25, 0.25])
    F = np.array([-0.5, 0.25])
    A = np.array([[1.0, -1.0], [0.0, -1.0]])
    return quadratic_problem(W, A, np.zeros(2), F=F, name="convex-penalized")


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def rosenbrock_grad(x):
    return np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
                     200 * (x[1] - x[0] ** 2)])


def rosenbrock_hess(x):
    return np.array([[2 - 400 * x[1] + 1200 * x[0] ** 2, -400 * x[0]],
                     [-400 * x[0], 200.0]])


def rosenbrock_disk():
    return ProblemInstance(
        name="rosenbrock-disk", n=2, m=1,
        objective=rosenbrock, gradient=rosenbrock_grad, hessian=rosenbrock_hess,
        constraints=lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 2]),
        jacobian=lambda x: np.array([[2 * x[0], 2 * x[1]]]),
    )


def rosenbrock_cubic():
    return ProblemInstance(
        name="rosenbrock-cubic", n=2, m=2,
        objective=rosenbrock, gradient=rosenbrock_grad, hessian=rosenbrock_hess,
        constraints=lambda x: np.array([(x[0] - 1) ** 3 - x[1] + 1, x[0] + x[1] - 2]),
        jacobian=lambda x: np.array([[3 * (x[0] - 1) ** 2, -1.0], [1.0, 1.0]]),
    )


def build_example(id, seed=None, **kwargs):
    """Build one of the named example problems.

    ``random-qp`` requires ``seed``; extra keyword arguments are forwarded to
    :func:`random_qp`.
    """
    if id == "random-qp":
        if seed is None:
            raise ValueError("random-qp requires a seed")
        return random_qp(seed, **kwargs)
    builders = {
        "convex-penalized": convex_penalized,
        "rosenbrock-disk": rosenbrock_disk,
        "rosenbrock-cubic": rosenbrock_cubic,
    }
    try:
        return builders[id]()
    except KeyError:
        raise UnknownExampleError(f"unknown example {id!r}; choose from {EXAMPLES}") from None
