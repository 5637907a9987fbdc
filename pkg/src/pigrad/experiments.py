"""Named experiments: run, record CSV artifacts, and check the outcome.

Each experiment writes ``trajectory.csv``, ``summary.csv`` and
``summary.json`` into ``<out>/<experiment>/``.  ``summary.csv`` has the fixed
column order in :data:`SUMMARY_COLUMNS`.
"""

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import estimation as est
from .dynamics import ControlParams, flow
from .errors import DecayDomainError, DivergenceError, PigradError, SingularityError
from .integrate import IntegratorConfig, fit_decay_rate, simulate
from .manifolds import estimator_control, linear_manifold, quadratic_manifold
from .oracles import grid_oracle, kkt_residual, projected_gradient_oracle
from .problems import build_example, feasible_set
from .projection import project_feasible

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("experiment", "seed", "final_err", "fitted_rate_S", "fitted_rate_psi",
                   "max_g_violation", "kkt_stationarity", "exit")

# Per-experiment defaults.
DEFAULTS = {
    "qp-interior": dict(problem="random-qp", placement="interior", kind="controlled",
                        alpha=10.0, k=0.001, dt=0.01, T=50.0),
    "qp-boundary": dict(problem="random-qp", placement="boundary", kind="projected",
                        alpha=10.0, k=0.001, dt=0.01, T=50.0),
    "convex-projected": dict(problem="convex-penalized", kind="projected",
                             alpha=10.0, k=0.01, dt=0.1, T=50.0),
    "convex-cbf": dict(problem="convex-penalized", kind="cbf",
                       alpha=10.0, k=0.2, dt=0.1, T=50.0, retry_on_fail=True),
    "rosenbrock-disk": dict(problem="rosenbrock-disk", kind="controlled",
                            alpha=5.0, k=0.001, dt=1e-3, T=20.0),
    "rosenbrock-cubic": dict(problem="rosenbrock-cubic", kind="controlled",
                             alpha=5.0, k=0.01, dt=1e-3, T=40.0),
    "cge2": dict(regressor="two-param", theta=(2.0, -2.0),
                 gamma=10.0, beta=0.75, alpha=10.0, sigma=0.0, dt=1e-3, T=10.0),
    "cge2-noise": dict(regressor="two-param", theta=(2.0, -2.0),
                       gamma=10.0, beta=0.75, alpha=10.0, sigma=0.04, dt=1e-3, T=10.0),
    "cge3": dict(regressor="three-param", theta=(1.0, 2.0, 3.0),
                 gamma=100.0, beta=0.95, alpha=10.0, sigma=0.0, dt=1e-3, T=10.0),
    "cge3-noise": dict(regressor="three-param", theta=(1.0, 2.0, 3.0),
                       gamma=100.0, beta=0.95, alpha=10.0, sigma=0.02, dt=1e-3, T=10.0),
}
EXPERIMENTS = tuple(DEFAULTS)

FALLBACK_DT = 1e-3
CBF_RECOVERY_WINDOW = 1.0


@dataclass
class ExperimentConfig:
    """Parameters of one run; ``None`` fields take the experiment default."""

    experiment: str
    alpha: Optional[float] = None
    k: Optional[float] = None
    gamma: Optional[float] = None
    beta: Optional[float] = None
    sigma: Optional[float] = None
    dt: Optional[float] = None
    T: Optional[float] = None
    seed: int = 0
    method: str = "euler"
    out: str = "runs"
    record_every: Optional[int] = None
    x0: Optional[tuple] = None
    lam0: Optional[tuple] = None

    def resolved(self):
        if self.experiment not in DEFAULTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        d = DEFAULTS[self.experiment]
        filled = {name: d.get(name) if getattr(self, name) is None else getattr(self, name)
                  for name in ("alpha", "k", "gamma", "beta", "sigma", "dt", "T")}
        if self.record_every is None:
            filled["record_every"] = max(1, int(round(1e-2 / filled["dt"])))
        return replace(self, **filled)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: dict
    checks: list = field(default_factory=list)
    trajectory: object = None
    paths: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.summary["exit"] == 0


def _le(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value <= threshold))


def _within(name, value, target, rel):
    err = abs(value - target) / abs(target)
    return Check(name, float(value), float(target), bool(err <= rel))


def _safe_rate(traj, channel, t_start=0.0, t_end=None):
    try:
        return fit_decay_rate(traj, channel, t_start, t_end)
    except (DecayDomainError, ValueError):
        return math.nan


def constraint_excursions(times, g):
    """Intervals where a constraint is positive.

    Returns ``(component, t_enter, t_exit)`` triples; ``t_exit`` is ``None``
    when the trajectory ends while still infeasible.
    """
    out = []
    g = np.atleast_2d(np.asarray(g).T).T if np.ndim(g) == 1 else np.asarray(g)
    for j in range(g.shape[1]):
        pos = g[:, j] > 0
        i = 0
        while i < len(times):
            if pos[i]:
                start = i
                while i < len(times) and pos[i]:
                    i += 1
                out.append((j, float(times[start]), float(times[i]) if i < len(times) else None))
            i += 1
    return out


# -- primal-dual runs ---------------------------------------------------------

def _initial_pdgd(cfg, p, kind):
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
    elif cfg.experiment.startswith("qp-"):
        x0 = np.ones(p.n)
    elif cfg.experiment == "rosenbrock-cubic":
        x0 = np.array([0.0, 1.0])
    else:
        x0 = np.zeros(p.n)
    if kind == "projected":
        x0 = project_feasible(feasible_set(p), x0)
    if cfg.lam0 is not None:
        lam0 = np.asarray(cfg.lam0, dtype=float)
    elif kind == "cbf":
        lam0 = 0.5 * np.ones(p.m)
    elif cfg.experiment.startswith("qp-") or cfg.experiment == "convex-projected":
        lam0 = np.ones(p.m)
    else:
        lam0 = np.zeros(p.m)
    return x0, lam0


def _reference_optimum(p, exp):
    if p.affine_data is not None:
        L = np.linalg.eigvalsh(p.extra["W"] + p.extra["W"].T)[-1]
        x0 = project_feasible(feasible_set(p), np.zeros(p.n))
        return projected_gradient_oracle(p, x0, 1.0 / L, 20_000, tol=1e-14)
    return grid_oracle(p, [(-2.0, 2.0)] * p.n, 2000)


def build_pdgd(cfg):
    d = DEFAULTS[cfg.experiment]
    p = build_example(d["problem"], seed=cfg.seed, **({"placement": d["placement"]}
                                                      if "placement" in d else {}))
    cp = ControlParams(alpha=cfg.alpha, k=cfg.k)
    mf = quadratic_manifold(p, cfg.k) if d["kind"] == "cbf" else linear_manifold(p, cfg.k)
    return p, cp, mf, d["kind"]


def pdgd_diagnostics(p, mf, field):
    n = p.n

    def diag(t, z):
        x, lam = z[:n], z[n:]
        psi = np.atleast_1d(mf.psi(x, lam))
        g = np.asarray(p.constraints(x), dtype=float)
        lamdot = field(t, z)[n:]
        return {"S": 0.5 * float(psi @ psi), "psi_norm": float(np.linalg.norm(psi)),
                "g": g, "u": lamdot - g, "f": float(p.objective(x))}

    return diag


def _simulate_pdgd(cfg):
    p, cp, mf, kind = build_pdgd(cfg)
    x0, lam0 = _initial_pdgd(cfg, p, kind)
    field_ = flow(p, cp, kind, mf)
    icfg = IntegratorConfig(cfg.method, cfg.dt, cfg.T, cfg.record_every)
    traj = simulate(field_, np.concatenate([x0, lam0]), icfg,
                    diagnostics=pdgd_diagnostics(p, mf, field_))
    return p, traj


def _run_pdgd(cfg, result):
    """Run, and for the convex examples retry once at ``FALLBACK_DT``.

    The coarse step of the convex examples is retried when it diverges or
    hits the barrier singularity.  The barrier flow is also retried when its
    checks fail: its law is singular at ``lam = 0`` and a coarse step can
    jump across that set without producing a non-finite value.  Retries are
    noted in the summary.
    """
    retry = cfg.experiment.startswith("convex-") and cfg.dt > FALLBACK_DT
    retry_on_fail = retry and DEFAULTS[cfg.experiment].get("retry_on_fail", False)
    try:
        p, traj = _simulate_pdgd(cfg)
        _evaluate_pdgd(cfg, p, traj, result)
        failed = retry_on_fail and not all(c.passed for c in result.checks)
        reason = "failed its checks"
    except (DivergenceError, SingularityError) as err:
        if not retry:
            raise
        failed, reason = True, f"raised {type(err).__name__}: {err}"
    if retry and failed:
        result.notes.append(f"dt={cfg.dt:g} {reason}; reran with dt={FALLBACK_DT:g}")
        cfg = replace(cfg, dt=FALLBACK_DT, record_every=max(1, int(round(1e-2 / FALLBACK_DT))))
        result.config = cfg
        p, traj = _simulate_pdgd(cfg)
        _evaluate_pdgd(cfg, p, traj, result)
    result.summary["dt_used"] = cfg.dt
    return p.n, p.m


def _evaluate_pdgd(cfg, p, traj, result):
    result.trajectory = traj
    n = p.n
    xT, lamT = traj.final[:n], traj.final[n:]
    x_ref = _reference_optimum(p, cfg.experiment)
    g = traj.channel("g")
    t_fit = min(cfg.T, 30.0 / cfg.alpha)
    summary = dict(
        final_err=float(np.linalg.norm(xT - x_ref)),
        fitted_rate_S=_safe_rate(traj, "S", 0.0, t_fit),
        fitted_rate_psi=_safe_rate(traj, "psi_norm", 0.0, t_fit),
        max_g_violation=float(max(0.0, g.max())),
        kkt_stationarity=kkt_residual(p, xT, lamT).stationarity,
    )
    exp = cfg.experiment
    checks = []
    if exp == "qp-interior":
        checks += [_within("fitted_rate_S", summary["fitted_rate_S"], cfg.alpha, 0.10),
                   _within("fitted_rate_psi", summary["fitted_rate_psi"], cfg.alpha / 2, 0.10),
                   _le("final_err", summary["final_err"], 1e-2)]
    elif exp == "qp-boundary":
        checks += [_le("max_g_violation", summary["max_g_violation"], 1e-9),
                   _le("final_err", summary["final_err"], 1e-2)]
    elif exp == "convex-projected":
        f_gap = abs(p.objective(xT) - p.objective(x_ref))
        checks += [_le("final_err", summary["final_err"], 1e-3),
                   _le("objective_gap", f_gap, 1e-4),
                   _le("max_g_violation", summary["max_g_violation"], 1e-9)]
    elif exp == "convex-cbf":
        exc = constraint_excursions(traj.times, g)
        worst = max([(te if te is not None else math.inf) - ts for _, ts, te in exc],
                    default=0.0)
        checks += [_le("longest_excursion", worst, CBF_RECOVERY_WINDOW),
                   _le("terminal_g_max", float(g[-1].max()), 0.0)]
    elif exp == "rosenbrock-disk":
        after = traj.times > 1.0
        checks += [_le("final_err", summary["final_err"], 1e-2),
                   _le("max_g_after_burn_in", float(g[after].max()), 1e-6)]
    elif exp == "rosenbrock-cubic":
        checks += [_le("final_err", summary["final_err"], 1e-2),
                   _le("terminal_g_max", float(g[-1].max()), 1e-6)]
    result.summary.update(summary)
    result.summary["x_final"] = xT.tolist()
    result.summary["lambda_final"] = lamT.tolist()
    result.summary["x_reference"] = np.asarray(x_ref).tolist()
    result.checks = checks


# -- estimator runs -----------------------------------------------------------

def build_estimator(cfg):
    d = DEFAULTS[cfg.experiment]
    theta = np.array(d["theta"])
    lre = est.Lre(theta_true=theta, regressor=lambda t, r=d["regressor"]: est.regressor(r, t),
                  noise_sd=cfg.sigma)
    ecfg = est.EstimatorConfig.for_q(len(theta), cfg.gamma, cfg.beta, cfg.alpha)
    noise = None
    if cfg.sigma > 0:
        noise = est.HeldNoise(cfg.sigma, cfg.dt, cfg.T, np.random.default_rng(cfg.seed))
    return lre, ecfg, noise


def _run_estimator(cfg, result):
    lre, ecfg, noise = build_estimator(cfg)
    q = lre.q
    theta = lre.theta_true

    def diag(t, z):
        Omega, Y, th_hat = est.unpack(z, q)
        err = theta - th_hat
        innov = Y - Omega @ th_hat
        r = err[1:] - ecfg.beta * err[0]
        return {"S": est.estimator_storage(ecfg.beta, err), "psi_norm": float(np.linalg.norm(r)),
                "u": estimator_control(ecfg.beta, ecfg.gamma, innov)[1:],
                "f": 0.5 * float(innov @ innov)}

    icfg = IntegratorConfig(cfg.method, cfg.dt, cfg.T, cfg.record_every)
    traj = simulate(est.estimator_flow(lre, ecfg, noise), est.initial_state(q), icfg,
                    diagnostics=diag)
    result.trajectory = traj
    _, _, th_hat = est.unpack(traj.final, q)
    final_err = float(np.linalg.norm(th_hat - theta))
    result.summary.update(
        final_err=final_err,
        fitted_rate_S=_safe_rate(traj, "S", 1.0),
        fitted_rate_psi=_safe_rate(traj, "psi_norm", 1.0),
        max_g_violation=math.nan,
        kkt_stationarity=math.nan,
        theta_final=th_hat.tolist(),
    )
    tol = 5e-2 if cfg.sigma > 0 else 1e-2
    result.checks = [_le("final_err", final_err, tol)]
    return q, 0


# -- artifacts ----------------------------------------------------------------

def _trajectory_rows(traj, n, m, estimator):
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    header += [f"lambda{i + 1}" for i in range(m)]
    header += ["S", "psi_norm"] + [f"g{i + 1}" for i in range(m)]
    u = traj.channel("u").reshape(len(traj.times), -1)
    header += [f"u{i + 1}" for i in range(u.shape[1])] + ["f"]
    g = (np.empty((len(traj.times), 0)) if estimator
         else traj.channel("g").reshape(len(traj.times), -1))
    states = traj.states[:, -n:] if estimator else traj.states
    rows = np.column_stack([traj.times, states, traj.channel("S"), traj.channel("psi_norm"),
                            g, u, traj.channel("f")])
    return header, rows


def write_artifacts(result, n, m):
    cfg = result.config
    out = Path(cfg.out) / cfg.experiment
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    if result.trajectory is not None:
        estimator = cfg.experiment.startswith("cge")
        header, rows = _trajectory_rows(result.trajectory, n, m, estimator)
        paths["trajectory"] = out / "trajectory.csv"
        with open(paths["trajectory"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[repr(float(v)) for v in row] for row in rows])
    paths["summary"] = out / "summary.csv"
    with open(paths["summary"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerow([result.summary.get(c, math.nan) for c in SUMMARY_COLUMNS])
    paths["json"] = out / "summary.json"
    payload = {"config": asdict(cfg), "summary": result.summary,
               "checks": [asdict(c) for c in result.checks], "notes": result.notes}
    with open(paths["json"], "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
    result.paths = {k: str(v) for k, v in paths.items()}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment, write its artifacts and evaluate its checks.

    ``summary["exit"]`` is 0 when every check passes, 1 when a check fails
    and 2 when a lower module raised (divergence, singularity, ...).
    """
    cfg = cfg.resolved()
    result = ExperimentResult(config=cfg, summary={"experiment": cfg.experiment, "seed": cfg.seed})
    start = time.perf_counter()
    n = m = 0
    try:
        if cfg.experiment.startswith("cge"):
            n, m = _run_estimator(cfg, result)
        else:
            n, m = _run_pdgd(cfg, result)
        result.summary["exit"] = 0 if all(c.passed for c in result.checks) else 1
    except PigradError as err:
        log.error("%s failed: %s", cfg.experiment, err)
        result.notes.append(f"{type(err).__name__}: {err}")
        result.trajectory = None
        for c in SUMMARY_COLUMNS[2:-1]:
            result.summary.setdefault(c, math.nan)
        result.summary["exit"] = 2
    result.summary["runtime_s"] = time.perf_counter() - start
    write_artifacts(result, n, m)
    return result
