"""Controlled primal-dual gradient dynamics and controlled gradient estimators."""

from .dynamics import ControlParams, PdgdState, flow
from .errors import PigradError
from .integrate import IntegratorConfig, Trajectory, fit_decay_rate, simulate
from .manifolds import linear_manifold, quadratic_manifold, synthesize_control
from .problems import EXAMPLES, ProblemInstance, build_example

__all__ = [
    "ControlParams", "PdgdState", "flow", "PigradError", "IntegratorConfig", "Trajectory",
    "fit_decay_rate", "simulate", "linear_manifold", "quadratic_manifold",
    "synthesize_control", "EXAMPLES", "ProblemInstance", "build_example",
]
__version__ = "0.1.0"
