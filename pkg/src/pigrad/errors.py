"""Exception types raised across the package."""


class PigradError(Exception):
    """Base class for all package errors."""


class DimensionError(PigradError, ValueError):
    """An input vector or matrix has the wrong shape."""


class UnknownExampleError(PigradError, KeyError):
    pass


class IndefiniteHessianError(PigradError, ValueError):
    """The Hessian has a non-positive eigenvalue, so no condition number."""


class SingularityError(PigradError, ZeroDivisionError):
    """A dual component is too close to zero for the quadratic manifold law."""


class UnsupportedSetError(PigradError, ValueError):
    """Projection was requested onto a set that is not a polyhedron."""


class IterationLimitError(PigradError, RuntimeError):
    pass


class DivergenceError(PigradError, FloatingPointError):
    """A simulated or iterated state became non-finite or blew up.

    ``t`` holds the last time (or iteration index) at which the state was
    still finite.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DecayDomainError(PigradError, ValueError):
    """Exponential-rate fit requested on a channel with non-positive values."""


class EmptyFeasibleError(PigradError, ValueError):
    pass
