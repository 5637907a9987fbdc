"""Primal-dual gradient vector fields: plain, controlled, projected, barrier-like.

All fields take a :class:`PdgdState` and return ``(xdot, lamdot)``.  Use
:func:`flow` to get a flat ``f(t, z)`` for :func:`pigrad.integrate.simulate`.
"""

from dataclasses import dataclass

import numpy as np

from .manifolds import linear_manifold, manifold_dual_rate, quadratic_manifold
from .problems import feasible_set
from .projection import project_feasible


@dataclass(frozen=True)
class PdgdState:
    x: np.ndarray
    lam: np.ndarray

    @property
    def z(self):
        return np.concatenate([self.x, self.lam])

    @classmethod
    def from_z(cls, z, n):
        z = np.asarray(z, dtype=float)
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class ControlParams:
    """Decay rate, manifold gain and projection parameters.

    ``alpha_x`` is the trial step of the projected flow and ``beta_relax``
    its relaxation gain.  With both equal to one an interior Euler step of
    the projected flow is exactly an Euler gradient step on the Lagrangian.
    """

    alpha: float
    k: float
    alpha_x: float = 1.0
    beta_relax: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.k < 0:
            raise ValueError("k must be non-negative")


def lagrangian_grad_x(p, x, lam):
    return p.gradient(x) + np.asarray(p.jacobian(x)).reshape(p.m, p.n).T @ lam


def pdgd_field(p, s):
    """Uncontrolled saddle flow ``xdot = -grad_x L``, ``lamdot = g(x)``."""
    return -lagrangian_grad_x(p, s.x, s.lam), np.asarray(p.constraints(s.x), dtype=float)


def controlled_field(p, mf, cp, s):
    """PDGD with the manifold control in the dual channel.

    ``lamdot = -k grad g(x) xdot - (alpha/2)(lam + k g(x))``, identical to
    ``g(x) + u`` with ``u`` from :func:`pigrad.manifolds.synthesize_control`.
    """
    if mf.form != "linear":
        raise ValueError("controlled_field needs a linear manifold; use cbf_field")
    xdot = -lagrangian_grad_x(p, s.x, s.lam)
    return xdot, manifold_dual_rate(mf, cp.alpha, s.x, s.lam, xdot)


def cbf_field(p, mf, cp, s):
    """PDGD with the quadratic (barrier-like) manifold law.

    Raises :class:`~pigrad.errors.SingularityError` when any dual
    component is within ``LAMBDA_EPS`` of zero.
    """
    if mf.form != "quadratic":
        raise ValueError("cbf_field needs a quadratic manifold")
    xdot = -lagrangian_grad_x(p, s.x, s.lam)
    return xdot, manifold_dual_rate(mf, cp.alpha, s.x, s.lam, xdot)


def projected_field(p, mf, cp, s, X=None):
    X = feasible_set(p) if X is None else X
    trial = s.x - cp.alpha_x * lagrangian_grad_x(p, s.x, s.lam)
    xdot = cp.beta_relax * (project_feasible(X, trial) - s.x)
    return xdot, manifold_dual_rate(mf, cp.alpha, s.x, s.lam, xdot)


def projected_step(p, s, cp, dt, mf=None, X=None):
    """One explicit Euler step of the globally projected controlled flow.

    ``xdot = beta_relax * (P_X(x - alpha_x grad_x L) - x)``; the dual follows
    the manifold law driven by that projected ``xdot``.  For
    ``dt * beta_relax <= 1`` the new primal point is a convex combination of
    two points of ``X`` and so stays in ``X``.
    """
    mf = linear_manifold(p, cp.k) if mf is None else mf
    xdot, lamdot = projected_field(p, mf, cp, s, X)
    return PdgdState(s.x + dt * xdot, s.lam + dt * lamdot)


def target_field(p, k, x):
    """On-manifold primal dynamics ``-grad f(x) + k grad g(x)^T g(x)``."""
    J = np.asarray(p.jacobian(x)).reshape(p.m, p.n)
    return -p.gradient(x) + k * J.T @ p.constraints(x)


def equilibrium_residual(p, k, x):
    return float(np.linalg.norm(target_field(p, k, np.asarray(x, dtype=float))))


def flow(p, cp, kind="controlled", mf=None):
    """Flat vector field ``f(t, z)`` over ``z = (x, lam)``.

    ``kind`` is one of ``plain``, ``controlled``, ``cbf``, ``projected`` or
    ``target`` (the last acts on ``x`` alone).
    """
    n = p.n
    if kind == "target":
        return lambda t, x: target_field(p, cp.k, x)
    if kind == "plain":
        fn = lambda s: pdgd_field(p, s)
    elif kind == "controlled":
        mf = linear_manifold(p, cp.k) if mf is None else mf
        fn = lambda s: controlled_field(p, mf, cp, s)
    elif kind == "cbf":
        mf = quadratic_manifold(p, cp.k) if mf is None else mf
        fn = lambda s: cbf_field(p, mf, cp, s)
    elif kind == "projected":
        mf = linear_manifold(p, cp.k) if mf is None else mf
        X = feasible_set(p)
        fn = lambda s: projected_field(p, mf, cp, s, X)
    else:
        raise ValueError(f"unknown flow kind {kind!r}")

    def f(t, z):
        xdot, lamdot = fn(PdgdState.from_z(z, n))
        return np.concatenate([xdot, lamdot])

    return f
