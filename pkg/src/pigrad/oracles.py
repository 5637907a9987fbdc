"""Independent reference solvers, used by tests and experiment checks only.

Nothing in the dynamics modules imports from here.
"""

from collections import namedtuple

import numpy as np

from .errors import DivergenceError, EmptyFeasibleError
from .problems import feasible_set
from .projection import project_feasible

KktResidual = namedtuple("KktResidual", "stationarity primal_viol dual_viol comp_slack")


def kkt_residual(p, x, lam):
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(p.constraints(x), dtype=float)
    J = np.asarray(p.jacobian(x), dtype=float).reshape(p.m, p.n)
    return KktResidual(
        stationarity=float(np.linalg.norm(p.gradient(x) + J.T @ lam)),
        primal_viol=float(np.linalg.norm(np.maximum(g, 0.0))),
        dual_viol=float(np.linalg.norm(np.maximum(-lam, 0.0))),
        comp_slack=float(abs(lam @ g)),
    )


def _feasible_edge(p, x, i, inside, outside, iters=60):
    """Bisect along axis ``i`` for the feasibility boundary."""
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        y = x.copy()
        y[i] = mid
        if np.all(p.constraints(y) <= 0):
            inside = mid
        else:
            outside = mid
    return inside


def _refine_axis(p, x, i, h, lo, hi, iters=60):
    a, b = max(x[i] - h, lo), min(x[i] + h, hi)
    for end in ("a", "b"):
        y = x.copy()
        y[i] = a if end == "a" else b
        if np.any(p.constraints(y) > 0):
            edge = _feasible_edge(p, x, i, x[i], y[i])
            a, b = (edge, b) if end == "a" else (a, edge)

    def slope(t):
        y = x.copy()
        y[i] = t
        return p.gradient(y)[i]

    if slope(a) >= 0:
        t = a
    elif slope(b) <= 0:
        t = b
    else:
        for _ in range(iters):
            mid = 0.5 * (a + b)
            if slope(mid) > 0:
                b = mid
            else:
                a = mid
        t = 0.5 * (a + b)
    out = x.copy()
    out[i] = t
    if p.objective(out) <= p.objective(x):
        return out
    return x


def grid_oracle(p, bounds, resolution=2000):
    """Brute-force feasible minimiser on a regular grid, then axis bisection.

    ``bounds`` is a sequence of ``(lo, hi)`` per axis; only ``n <= 2``.
    After the best feasible grid point is found, each axis is refined once
    within one grid cell by bisecting on the sign of the partial derivative,
    clipped to the feasible segment.
    """
    if p.n > 2:
        raise ValueError("grid oracle supports n <= 2")
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    # chunked to keep memory flat for 4e6 points
    best_val, best = np.inf, None
    for chunk in np.array_split(pts, max(1, len(pts) // 250_000)):
        X = chunk.T
        fvals = np.asarray(p.objective(X), dtype=float)
        gvals = np.asarray(p.constraints(X), dtype=float).reshape(p.m, -1)
        fvals = np.where(np.all(gvals <= 0, axis=0), fvals, np.inf)
        j = int(np.argmin(fvals))
        if fvals[j] < best_val:
            best_val, best = fvals[j], chunk[j].copy()
    if best is None or not np.isfinite(best_val):
        raise EmptyFeasibleError(f"no feasible grid point for {p.name} in {bounds}")
    for i, (lo, hi) in enumerate(bounds):
        h = (hi - lo) / (resolution - 1)
        best = _refine_axis(p, best, i, h, lo, hi)
    return best


def projected_gradient_oracle(p, x0, eta, iters, blowup=1e12, tol=0.0):
    """Projected gradient descent ``x <- P_X(x - eta grad f(x))``.

    Stops early once an iteration moves ``x`` by no more than ``tol``.
    """
    X = feasible_set(p)
    x = np.array(x0, dtype=float)
    for it in range(iters):
        x_new = project_feasible(X, x - eta * p.gradient(x))
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > blowup:
            raise DivergenceError(
                f"projected gradient diverged at iteration {it} (eta={eta})", t=it)
        done = np.max(np.abs(x_new - x)) <= tol
        x = x_new
        if done:
            break
    return x
