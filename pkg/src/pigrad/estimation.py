"""Linear regression estimation with a memory regressor and controlled gradients.

The measured model is ``y(t) = phi(t)^T theta + eps(t) + noise``.  A single
first-order filter ``1/(s+1)`` turns it into the memory regression
``Y = Omega theta`` with

    Omega' = -Omega + phi phi^T,    Y' = -Y + phi y,

and the controlled gradient estimator runs

    theta_hat' = gamma * P @ (Y - Omega theta_hat)

with the lower-triangular scaling matrix ``P`` from :func:`scaling_matrix`.
``P = I`` recovers the plain gradient estimator.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

REGRESSORS = ("two-param", "three-param")


def _decaying_term(t):
    s, c = math.sin(t), math.cos(t)
    return (s + c) / math.sqrt(1 + t) - s / (2 * (1 + t) ** 1.5)


def regressor(id, t):
    """Non-PE regressors of the two- and three-parameter examples."""
    if id == "two-param":
        return np.array([1.0, _decaying_term(t)])
    if id == "three-param":
        return np.array([1.0, math.cos(t), _decaying_term(t)])
    raise ValueError(f"unknown regressor {id!r}; choose from {REGRESSORS}")


@dataclass(frozen=True)
class Lre:
    theta_true: np.ndarray
    regressor: Callable[[float], np.ndarray]
    noise_sd: float = 0.0
    decaying_eps: Optional[Callable[[float], float]] = None

    @property
    def q(self):
        return len(self.theta_true)

    def output(self, t, noise=0.0):
        eps = 0.0 if self.decaying_eps is None else self.decaying_eps(t)
        return float(self.regressor(t) @ self.theta_true + eps + noise)


def noisy_measurement(lre, t, rng):
    """One measurement with Gaussian noise of standard deviation ``noise_sd``."""
    return lre.output(t, lre.noise_sd * rng.standard_normal())


class HeldNoise:
    """Gaussian noise sampled once per step and held in between.

    Makes the measurement a deterministic function of ``t`` so that every
    integrator stage sees the same draw within a step.
    """

    def __init__(self, sigma, dt, T, rng):
        self.sigma = sigma
        self.dt = dt
        self.values = sigma * rng.standard_normal(int(round(T / dt)) + 2)

    def __call__(self, t):
        i = min(int(np.floor(t / self.dt + 1e-9)), len(self.values) - 1)
        return self.values[i]


@dataclass(frozen=True)
class MreState:
    Omega: np.ndarray
    Y: np.ndarray

    @classmethod
    def zeros(cls, q):
        return cls(np.zeros((q, q)), np.zeros(q))


def mre_filter_field(phi, y, s):
    return -s.Omega + np.outer(phi, phi), -s.Y + phi * y


def scaling_matrix(q, beta):
    P = 2.0 * np.eye(q)
    P[0, 0] = 1.0
    P[1:, 0] = -beta
    return P


@dataclass(frozen=True)
class EstimatorConfig:
    gamma: float
    beta: float
    alpha: float
    P: np.ndarray

    @classmethod
    def for_q(cls, q, gamma, beta, alpha=10.0, plain=False):
        """Controlled config for ``q`` parameters, or plain GE if ``plain``."""
        P = np.eye(q) if plain else scaling_matrix(q, beta)
        return cls(gamma=gamma, beta=beta, alpha=alpha, P=P)


def cge_field(cfg, s, theta_hat):
    return cfg.gamma * cfg.P @ (s.Y - s.Omega @ theta_hat)


def pee_field(cfg, Omega, theta_err):
    """Parametric error dynamics ``-gamma P Omega theta_err``."""
    return -cfg.gamma * cfg.P @ Omega @ theta_err


def estimator_storage(beta, theta_err):
    """``0.5 * sum_i (th_i - beta th_1)^2`` over the estimator manifolds."""
    th = np.asarray(theta_err, dtype=float)
    r = th[1:] - beta * th[0]
    return 0.5 * float(r @ r)


def pe_window_integral(regressor, t, T, panels=1000):
    """Smallest eigenvalue of the window integral of ``phi phi^T`` over ``[t, t+T]``.

    Composite Simpson with ``panels`` (even) sub-intervals.
    """
    taus = np.linspace(t, t + T, panels + 1)
    outer = np.array([np.outer(regressor(s), regressor(s)) for s in taus])
    M = simpson(outer, x=taus, axis=0)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def unpack(z, q, with_pee=False):
    Omega = z[:q * q].reshape(q, q)
    Y = z[q * q:q * q + q]
    theta_hat = z[q * q + q:q * q + 2 * q]
    if with_pee:
        return Omega, Y, theta_hat, z[q * q + 2 * q:]
    return Omega, Y, theta_hat


def initial_state(q, theta_hat0=None, theta_err0=None):
    parts = [np.zeros(q * q), np.zeros(q),
             np.zeros(q) if theta_hat0 is None else np.asarray(theta_hat0, dtype=float)]
    if theta_err0 is not None:
        parts.append(np.asarray(theta_err0, dtype=float))
    return np.concatenate(parts)


def estimator_flow(lre, cfg, noise=None, with_pee=False):
    """Flat field over ``(vec Omega, Y, theta_hat[, theta_err])``.

    ``noise(t)`` supplies the additive measurement noise (zero by default).
    With ``with_pee`` the parametric error is integrated alongside under the
    same ``Omega(t)``.
    """
    q = lre.q
    qq = q * q
    gP = cfg.gamma * cfg.P
    theta = lre.theta_true

    def f(t, z):
        Omega = z[:qq].reshape(q, q)
        Y = z[qq:qq + q]
        phi = lre.regressor(t)
        y = phi @ theta
        if lre.decaying_eps is not None:
            y += lre.decaying_eps(t)
        if noise is not None:
            y += noise(t)
        out = np.empty_like(z)
        out[:qq] = (np.outer(phi, phi) - Omega).ravel()
        out[qq:qq + q] = phi * y - Y
        out[qq + q:qq + 2 * q] = gP @ (Y - Omega @ z[qq + q:qq + 2 * q])
        if with_pee:
            out[qq + 2 * q:] = -gP @ Omega @ z[qq + 2 * q:]
        return out

    return f
