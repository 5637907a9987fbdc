"""Hand-derived control laws for the worked examples.

These are written out term by term, independently of the generic synthesis
in :mod:`pigrad.manifolds`, and serve as its cross-check.  Every law returns
the control ``u`` of ``lamdot = g(x) + u``.
"""

import numpy as np


def random_qp_law(p, alpha, k, x, lam):
    """Linear-manifold law for ``x^T W x`` s.t. ``A x <= b``.

    ``H = W + W^T`` is the gradient matrix of the objective.
    """
    A, b = p.affine_data
    H = p.extra["W"] + p.extra["W"].T
    return (-(A @ x - b) + k * A @ H @ x + k * A @ A.T @ lam
            - 0.5 * alpha * (lam + k * A @ x - k * b))


def convex_penalized_law(p, alpha, k, x, lam):
    A, _ = p.affine_data
    W, F = p.extra["W"], p.extra["F"]
    return (-A @ x + 2 * k * A @ W @ x + k * A @ F + k * A @ A.T @ lam
            - 0.5 * alpha * (lam + k * A @ x))


def rosenbrock_disk_law(p, alpha, k, x, lam):
    x1, x2 = x
    l = lam[0]
    u = (-x1 ** 2 - x2 ** 2 + 2
         - k * (800 * x1 ** 2 * (x2 - x1 ** 2) + 4 * x1 - 4 * x1 ** 2 - 4 * x1 ** 2 * l)
         - k * (400 * x1 ** 2 * x2 - 400 * x2 ** 2 - 4 * x2 ** 2 * l)
         - 0.5 * alpha * (l + k * (x1 ** 2 + x2 ** 2 - 2)))
    return np.array([u])


def rosenbrock_cubic_law(p, alpha, k, x, lam):
    """Both per-constraint laws.

    ``dg1/dx2 = -1``, so the ``x2``-velocity term of ``u1`` enters with a
    plus sign.
    """
    x1, x2 = x
    l1, l2 = lam
    xd1 = 400 * x1 * (x2 - x1 ** 2) - 2 * x1 + 2 - 3 * l1 * (x1 - 1) ** 2 - l2
    xd2 = 200 * x1 ** 2 - 200 * x2 + l1 - l2
    u1 = (-(x1 - 1) ** 3 + x2 - 1
          - 3 * k * (x1 - 1) ** 2 * (400 * x1 * (x2 - x1 ** 2))
          - 3 * k * (x1 - 1) ** 2 * (-2 * x1 + 2 - 3 * l1 * (x1 - 1) ** 2 - l2)
          + k * xd2
          - 0.5 * alpha * (l1 + k * ((x1 - 1) ** 3 - x2 + 1)))
    u2 = (-x1 - x2 + 2 - k * xd1 - k * xd2
          - 0.5 * alpha * (l2 + k * (x1 + x2 - 2)))
    return np.array([u1, u2])


def cbf_law(p, alpha, k, x, lam):
    """General quadratic-manifold law, componentwise in ``lam``."""
    g = p.constraints(x)
    J = np.asarray(p.jacobian(x)).reshape(p.m, p.n)
    inner = k * J @ (-p.gradient(x) - J.T @ lam) + 0.5 * alpha * (lam ** 2 + k * g)
    return -g - inner / (2 * lam)


def convex_cbf_law(p, alpha, k, x, lam):
    A, _ = p.affine_data
    W, F = p.extra["W"], p.extra["F"]
    inner = (-2 * k * A @ W @ x - k * A @ F - k * A @ A.T @ lam
             + 0.5 * alpha * (lam ** 2 + k * A @ x))
    return -A @ x - inner / (2 * lam)
