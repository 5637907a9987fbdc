"""Fixed-step ODE integration, trajectory recording and decay-rate fitting."""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import DecayDomainError, DivergenceError

METHODS = ("euler", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "euler"
    dt: float = 1e-3
    T: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if not (isinstance(self.record_every, int) and self.record_every >= 1):
            raise ValueError("record_every must be a positive integer")

    @property
    def steps(self):
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    """Recorded times, states (one row per record) and diagnostic channels."""

    times: np.ndarray
    states: np.ndarray
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if len(self.states) != len(self.times):
            raise ValueError("states and times differ in length")
        for name, values in self.diagnostics.items():
            if len(values) != len(self.times):
                raise ValueError(f"diagnostic {name!r} differs in length from times")

    def channel(self, name):
        return np.asarray(self.diagnostics[name])

    @property
    def final(self):
        return self.states[-1]


def _euler(f, t, y, dt):
    return y + dt * f(t, y)


def _rk4(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(field: Callable, x0, cfg: IntegratorConfig,
             diagnostics: Optional[Callable] = None, t0: float = 0.0) -> Trajectory:
    """Integrate ``y' = field(t, y)`` from ``x0`` with a fixed step.

    The initial state, every ``record_every``-th state and the final state
    are recorded.  ``diagnostics(t, y)`` may return a dict of scalars or
    arrays, evaluated at recorded points only.

    Raises
    ------
    DivergenceError
        A state component became NaN or infinite; ``.t`` is the last time
        with a finite state.
    """
    step = _euler if cfg.method == "euler" else _rk4
    y = np.array(x0, dtype=float)
    times, states, diag_rows = [], [], []

    def record(t, y):
        times.append(t)
        states.append(y.copy())
        if diagnostics is not None:
            diag_rows.append(diagnostics(t, y))

    record(t0, y)
    n = cfg.steps
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n + 1):
            t_prev = t0 + (i - 1) * cfg.dt
            y_new = step(field, t_prev, y, cfg.dt)
            if not np.all(np.isfinite(y_new)):
                raise DivergenceError(
                    f"non-finite state after t={t_prev:.6g}", t=t_prev)
            y = y_new
            if i % cfg.record_every == 0 or i == n:
                record(t0 + i * cfg.dt, y)

    diag = {}
    if diag_rows:
        for key in diag_rows[0]:
            diag[key] = np.array([row[key] for row in diag_rows], dtype=float)
    return Trajectory(np.array(times), np.array(states), diag)


def fit_decay_rate(traj, channel, t_start=0.0, t_end=None):
    """Negated least-squares slope of ``log(channel)`` over ``[t_start, t_end]``."""
    t = traj.times
    values = traj.channel(channel) if isinstance(channel, str) else np.asarray(channel)
    mask = t >= t_start
    if t_end is not None:
        mask &= t <= t_end
    tw, vw = t[mask], values[mask]
    if tw.size < 2:
        raise ValueError("need at least two samples in the fit window")
    if np.any(~(vw > 0)):
        raise DecayDomainError(f"channel {channel!r} has non-positive values in window")
    slope = np.polyfit(tw, np.log(vw), 1)[0]
    return float(-slope)
