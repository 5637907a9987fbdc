"""Euclidean projection onto polyhedra by Dykstra's alternating projections."""

import numpy as np

from .errors import IterationLimitError, UnsupportedSetError

TOL = 1e-10
MAX_SWEEPS = 10_000


def project_halfspace(z, a, b):
    viol = a @ z - b
    if viol <= 0:
        return z
    return z - (viol / (a @ a)) * a


def project_feasible(X, y, tol=TOL, max_sweeps=MAX_SWEEPS):
    """Minimum-norm projection of ``y`` onto the polyhedron ``X``.

    Feasible points are returned unchanged.  Otherwise Dykstra sweeps run
    over the halfspace rows until neither the iterate nor any correction
    term moves by more than ``tol``.

    Raises
    ------
    UnsupportedSetError
        ``X`` is not described by affine halfspaces.
    IterationLimitError
        No convergence within ``max_sweeps``.
    """
    if not X.is_polyhedral:
        raise UnsupportedSetError("projection is implemented for affine halfspaces only")
    A, b = X.A, X.b
    x = np.array(y, dtype=float)
    if np.all(A @ x - b <= 0):
        return x
    norms = np.einsum("ij,ij->i", A, A)
    incs = np.zeros((len(b), x.size))
    for _ in range(max_sweeps):
        x_start = x
        moved = 0.0
        for i in range(len(b)):
            z = x + incs[i]
            viol = A[i] @ z - b[i]
            x = z - (viol / norms[i]) * A[i] if viol > 0 else z
            new_inc = z - x
            moved = max(moved, np.abs(new_inc - incs[i]).max())
            incs[i] = new_inc
        if max(moved, np.abs(x - x_start).max()) < tol:
            return x
    raise IterationLimitError(f"Dykstra did not converge in {max_sweeps} sweeps")
