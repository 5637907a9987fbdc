"""Implicit manifolds, the pseudo-Riemannian metric, and P&I control synthesis.

Three manifold forms are supported:

``linear``     ``Psi(x, lam) = lam + k g(x)``; normal form ``lam - phi(x)``
               with ``phi = -k g`` and integrated connection ``q(x) = k g(x)``.
``quadratic``  ``Psi(x, lam) = lam**2 + k g(x)`` (componentwise), the
               barrier-like variant that keeps ``g <= 0`` on the manifold.
``estimator``  ``Psi_i(th) = th_i - beta * th_1`` for ``i = 2..q`` on the
               parameter error ``th = theta - theta_hat``.

For multi-constraint problems there is one manifold component per
constraint row and controls are computed row by row.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SingularityError

LAMBDA_EPS = 1e-6

FORMS = ("linear", "quadratic", "estimator")


@dataclass(frozen=True)
class ManifoldSpec:
    """An implicit manifold with its gradient.

    ``psi(x, lam)`` returns one value per manifold component and
    ``grad_psi(x, lam)`` returns the pair ``(dPsi/dx, dPsi/dlam)``.  For the
    estimator form ``k`` holds ``beta``, the first argument is the
    parameter error and ``lam`` is ignored.
    """

    form: str
    k: float
    psi: Callable
    grad_psi: Callable
    q_map: Optional[Callable] = None
    constraints: Optional[Callable] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown manifold form {self.form!r}")


@dataclass(frozen=True)
class PrMetric:
    """Blocks of the degenerate metric ``R = grad(Psi)^T grad(Psi)``."""

    m11: np.ndarray
    m12: np.ndarray
    m21: np.ndarray
    m22: np.ndarray

    def full(self):
        return np.block([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def connection(self):
        """``m22^{-1} m21``, the gradient of the integrated map ``q(x)``."""
        return np.linalg.solve(self.m22, self.m21)


def linear_manifold(p, k):
    m = p.m

    def grad_psi(x, lam):
        return k * np.asarray(p.jacobian(x), dtype=float).reshape(m, p.n), np.eye(m)

    return ManifoldSpec(
        form="linear", k=k,
        psi=lambda x, lam: np.asarray(lam, dtype=float) + k * p.constraints(x),
        grad_psi=grad_psi,
        q_map=lambda x: k * p.constraints(x),
        constraints=p.constraints,
    )


def quadratic_manifold(p, k):
    m = p.m

    def grad_psi(x, lam):
        lam = np.asarray(lam, dtype=float)
        return k * np.asarray(p.jacobian(x), dtype=float).reshape(m, p.n), np.diag(2 * lam)

    return ManifoldSpec(
        form="quadratic", k=k,
        psi=lambda x, lam: np.asarray(lam, dtype=float) ** 2 + k * p.constraints(x),
        grad_psi=grad_psi,
        constraints=p.constraints,
    )


def estimator_manifold(q, beta, gamma=None):
    G = np.hstack([-beta * np.ones((q - 1, 1)), np.eye(q - 1)])

    def psi(th, lam=None):
        th = np.asarray(th, dtype=float)
        return th[1:] - beta * th[0]

    return ManifoldSpec(form="estimator", k=beta, psi=psi,
                        grad_psi=lambda th, lam=None: (G, None), gamma=gamma)


def manifold_residual(mf, p, x, lam):
    """Componentwise manifold value ``Psi(x, lam)``."""
    return np.atleast_1d(mf.psi(x, lam))


def storage(mf, x, lam):
    """Storage (manifold Lyapunov) function ``0.5 * ||Psi||^2``."""
    r = np.atleast_1d(mf.psi(x, lam))
    return 0.5 * float(r @ r)


def on_manifold_dual(mf, x):
    """The dual vector that places ``(x, lam)`` on the manifold.

    For the quadratic form the positive root is returned, which exists only
    where ``g(x) <= 0``.
    """
    g = np.asarray(mf.constraints(x), dtype=float)
    if mf.form == "linear":
        return -mf.k * g
    if mf.form == "quadratic":
        if np.any(g > 0):
            raise ValueError("quadratic manifold has no real dual where g(x) > 0")
        return np.sqrt(-mf.k * g)
    raise ValueError("estimator manifolds carry no dual variable")


def invariance_defect(mf, field, x):
    """Normal component of ``field`` at the on-manifold point over ``x``.

    ``field(x, lam)`` returns ``(xdot, lamdot)``.  The result is
    ``||grad(Psi) . (xdot, lamdot)||``; zero means the flow is tangent to
    the manifold there.
    """
    x = np.asarray(x, dtype=float)
    lam = on_manifold_dual(mf, x)
    xdot, lamdot = field(x, lam)
    Px, Pl = mf.grad_psi(x, lam)
    return float(np.linalg.norm(Px @ xdot + Pl @ lamdot))


def pr_metric(mf, x):
    """PR metric blocks for a manifold in normal form ``lam - phi(x)``.

    With ``J = dphi/dx``: ``m11 = J^T J``, ``m12 = -J^T``, ``m21 = -J`` and
    ``m22 = I``.
    """
    if mf.form != "linear":
        raise ValueError(f"{mf.form} manifold is not in normal form lam - phi(x)")
    Px, Pl = mf.grad_psi(x, None)
    J = -Px
    return PrMetric(m11=J.T @ J, m12=-J.T, m21=-J, m22=Pl)


def manifold_dual_rate(mf, alpha, x, lam, xdot):
    """Dual velocity that makes the storage decay as ``dS/dt = -alpha S``.

    Linear manifolds go through the appendix route: PR metric, connection
    ``m22^{-1} m21 = grad q``, passive output ``y = lam + q(x)`` and
    ``lamdot = -(alpha/2) y - grad q . xdot``.  Quadratic manifolds solve
    ``2 lam_i lamdot_i = -dPsi_i/dx . xdot - (alpha/2) Psi_i`` row by row.
    """
    lam = np.asarray(lam, dtype=float)
    if mf.form == "linear":
        conn = pr_metric(mf, x).connection
        y = lam + mf.q_map(x)
        return -0.5 * alpha * y - conn @ xdot
    if mf.form == "quadratic":
        if np.any(np.abs(lam) <= LAMBDA_EPS):
            raise SingularityError(
                f"|lambda| <= {LAMBDA_EPS:g} in quadratic manifold law (lambda={lam})")
        Px, Pl = mf.grad_psi(x, lam)
        return -(Px @ xdot + 0.5 * alpha * mf.psi(x, lam)) / np.diag(Pl)
    raise ValueError("estimator manifolds use estimator_control")


def estimator_control(beta, gamma, innovation):
    """Controls added to the plain gradient estimator, one per parameter.

    ``innovation`` is the measurable ``Y - Omega theta_hat``.  Component 0 is
    uncontrolled; for ``i >= 1`` the control is
    ``gamma * (innovation_i - beta * innovation_0)``.  Adding this to
    ``gamma * innovation`` gives ``gamma * P @ innovation``.
    """
    e = np.asarray(innovation, dtype=float)
    u = gamma * (e - beta * e[0])
    u[0] = 0.0
    return u


def synthesize_control(mf, p, alpha, x, lam, xdot):
    """Control input ``u`` for the dual dynamics ``lamdot = g(x) + u``.

    For linear and quadratic manifolds the returned ``u`` makes the storage
    obey ``dS/dt = -alpha S`` exactly.  For the estimator form ``x`` is the
    innovation ``Y - Omega theta_hat`` and the result is
    :func:`estimator_control` (``alpha`` does not enter: the parameter
    error itself is not measurable).
    """
    if mf.form == "estimator":
        if mf.gamma is None:
            raise ValueError("estimator manifold needs gamma for synthesis")
        return estimator_control(mf.k, mf.gamma, x)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return manifold_dual_rate(mf, alpha, x, lam, xdot) - np.asarray(p.constraints(x), dtype=float)
