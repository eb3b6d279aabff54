"""
Sweeps behind the command line: magnetization dynamics, activation curves,
coupling sweeps and training runs.  Each function returns a header and a
list of rows in parameter order, independent of how many workers ran.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .collision import CollisionConfig, ReservoirSpec, detect_steady, run_dynamics
from .exceptions import NotConvergedError, NumericalError
from .learning import TrainingConfig, cost, actual_magnetization, train
from .master_eq import LindbladSpec, steady_magnetization
from .spin import spin_coherent_state

logger = logging.getLogger(__name__)

SOLVERS = ("collision", "nullspace")

DYNAMICS_PRESETS = {
    "fig1a": dict(j=0.5, theta=[0, 60, 80, 90, 100, 120, 180], phi=0.0, tau=3.0, g=0.02, collisions=3000),
    "fig1b": dict(j=2.5, theta=[0, 60, 80, 90, 100, 120, 180], phi=0.0, tau=3.0, g=0.02, collisions=3000),
}
ACTIVATION_PRESETS = {
    "fig2a": dict(j=[0.5], points=61, tau=3.0, g=0.02),
    "fig2b": dict(j=[2.5], points=61, tau=3.0, g=0.02),
    "fig2c": dict(j=[4.5], points=61, tau=3.0, g=0.02),
    "fig2": dict(j=[0.5, 2.5, 4.5], points=61, tau=3.0, g=0.02),
}
COUPLING_PRESETS = {
    "fig3": dict(j=[0.5, 2.5], g=0.02, points=21, theta1=0.0, theta2=180.0, tau=3.0),
}
_FIG4B = dict(sigma_z1=0.95, sigma_z2=-0.11, g1=0.001, g2=0.04, m_des=0.42, units="normalized", eta=1.2e-5)
TRAIN_PRESETS = {
    "fig4a": dict(
        j=[0.5], sigma_z1=0.94, sigma_z2=-0.10, g1=0.002, g2=0.05, m_des=0.42, units="normalized",
        eta=2e-5, eps=1e-8, max_iters=10_000,
    ),
    "fig4b": dict(j=[0.5, 1.0], eps=1e-8, max_iters=10_000, **_FIG4B),
    "fig5": dict(
        j=[1.0], sigma_z1=0.96, sigma_z2=-0.64, g1=0.001, g2=0.04, m_des=0.12, units="normalized",
        eta=2.4e-5, eps=1e-8, max_iters=10_000, surface=True,
    ),
    "fig6": dict(j=[0.5, 1.0, 1.5, 2.5], eps=1e-6, max_iters=10_000, **_FIG4B),
}


def pmap(func, items, jobs: int = 1) -> list:
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def x_mapped(theta: float) -> float:
    """Map theta in [pi, 0] linearly onto x in [-2 pi, 2 pi]."""
    return 2 * np.pi - 4 * theta


def initial_probe_state(j) -> np.ndarray:
    """Equatorial spin coherent state (zero magnetization)."""
    return spin_coherent_state(j, np.pi / 2, 0.0)


def _dynamics_point(theta_deg, j, phi_deg, tau, g, collisions, propagator, phase_averaged):
    config = CollisionConfig(
        j=j,
        reservoirs=(ReservoirSpec(np.radians(theta_deg), np.radians(phi_deg), g),),
        tau=tau,
        n_collisions=collisions,
        propagator=propagator,
        phase_averaged=phase_averaged,
        snapshot_stride=max(collisions, 1),
    )
    traj = run_dynamics(initial_probe_state(j), config)
    return [(theta_deg, int(n), t, m) for n, t, m in zip(traj.collisions, traj.elapsed, traj.magnetization)]


def dynamics_rows(j, theta, phi=0.0, tau=3.0, g=0.02, collisions=3000, propagator="exact",
                  phase_averaged=True, jobs=1):
    func = partial(
        _dynamics_point, j=j, phi_deg=phi, tau=tau, g=g, collisions=collisions,
        propagator=propagator, phase_averaged=phase_averaged,
    )
    rows = [r for block in pmap(func, theta, jobs) for r in block]
    return ["theta_deg", "n", "elapsed_time", "Sz_norm"], rows


def steady_point(j, reservoirs, tau, solver, phase_averaged, collisions=6000, abs_tol=1e-6, window=100,
                 propagator="exact"):
    """Steady normalized magnetization; returns (value, status)."""
    if solver == "nullspace":
        spec = LindbladSpec(j, reservoirs, tau, phase_averaged=phase_averaged)
        try:
            return steady_magnetization(spec), "ok"
        except NumericalError as exc:
            logger.warning("null-space solver failed: %s", exc)
            return float("nan"), "numerical-failure"
    config = CollisionConfig(
        j=j, reservoirs=reservoirs, tau=tau, n_collisions=collisions, propagator=propagator,
        phase_averaged=phase_averaged, snapshot_stride=collisions,
    )
    traj = run_dynamics(initial_probe_state(j), config)
    try:
        return detect_steady(traj, abs_tol, window).value, "ok"
    except NotConvergedError:
        return float(traj.magnetization[-1]), "not-converged"


def _activation_point(item, tau, g, phi_deg, solver, phase_averaged, collisions, abs_tol, window, propagator):
    j, theta_deg = item
    theta = np.radians(theta_deg)
    res = (ReservoirSpec(theta, np.radians(phi_deg), g),)
    value, status = steady_point(j, res, tau, solver, phase_averaged, collisions, abs_tol, window, propagator)
    x = x_mapped(theta)
    return (j, theta_deg, x, value, np.tanh(x), status)


def theta_grid(points: int) -> np.ndarray:
    if points < 2:
        raise ValueError("need at least 2 grid points")
    return np.linspace(0.0, 180.0, points)


def activation_rows(j, points=61, tau=3.0, g=0.02, phi=0.0, solver="nullspace", phase_averaged=True,
                    collisions=6000, abs_tol=1e-6, window=100, jobs=1, propagator="exact"):
    items = [(jj, float(t)) for jj in j for t in theta_grid(points)]
    func = partial(
        _activation_point, tau=tau, g=g, phi_deg=phi, solver=solver, phase_averaged=phase_averaged,
        collisions=collisions, abs_tol=abs_tol, window=window, propagator=propagator,
    )
    rows = pmap(func, items, jobs)
    return ["j", "theta_deg", "x_mapped", "Sz_norm_steady", "tanh_reference", "status"], rows


def coupling_pair(g: float, fraction: float) -> tuple[float, float]:
    """g1 = g/2 + f g and g2 = g/2 - f g, with the fraction f in [-1/2, 1/2]."""
    if not -0.5 - 1e-12 <= fraction <= 0.5 + 1e-12:
        raise ValueError("coupling fraction must lie in [-0.5, 0.5]")
    return max(g / 2 + fraction * g, 0.0), max(g / 2 - fraction * g, 0.0)


def _coupling_point(item, g, theta1_deg, theta2_deg, tau, solver, phase_averaged, collisions, abs_tol, window,
                    propagator):
    j, frac = item
    g1, g2 = coupling_pair(g, frac)
    res = (ReservoirSpec(np.radians(theta1_deg), 0.0, g1), ReservoirSpec(np.radians(theta2_deg), 0.0, g2))
    return steady_point(j, res, tau, solver, phase_averaged, collisions, abs_tol, window, propagator)


def coupling_rows(j, g=0.02, points=21, theta1=0.0, theta2=180.0, tau=3.0, solver="nullspace",
                  phase_averaged=True, collisions=20000, abs_tol=1e-6, window=100, jobs=1, propagator="exact"):
    fractions = np.linspace(-0.5, 0.5, points)
    items = [(jj, float(f)) for f in fractions for jj in j]
    func = partial(
        _coupling_point, g=g, theta1_deg=theta1, theta2_deg=theta2, tau=tau, solver=solver,
        phase_averaged=phase_averaged, collisions=collisions, abs_tol=abs_tol, window=window,
        propagator=propagator,
    )
    results = pmap(func, items, jobs)
    header = ["delta_g_fraction"] + [f"Sz_norm_steady_J{jj:g}" for jj in j] + ["status"]
    rows, k = [], 0
    for f in fractions:
        vals, status = [], "ok"
        for _ in j:
            v, st = results[k]
            k += 1
            vals.append(v)
            if st != "ok":
                status = st
        rows.append([float(f)] + vals + [status])
    return header, rows


def training_config(j, sigma_z1, sigma_z2, g1, g2, m_des, eta, max_iters=10_000, eps=1e-8,
                    grad_mode="auto", tau=3.0) -> TrainingConfig:
    res = (ReservoirSpec.from_sigma_z(sigma_z1, g1), ReservoirSpec.from_sigma_z(sigma_z2, g2))
    return TrainingConfig(j=j, reservoirs=res, m_des=m_des, eta=eta, max_iters=max_iters, eps=eps,
                          grad_mode=grad_mode, tau=tau)


def _train_one(config: TrainingConfig):
    return [(config.j, s.iteration, s.couplings[0], s.couplings[1], s.cost, s.m_act) for s in train(config)]


def train_rows(configs, jobs=1):
    rows = [r for block in pmap(_train_one, configs, jobs) for r in block]
    return ["j", "iter", "g1", "g2", "cost", "m_act"], rows


def _surface_point(item, spec, m_des):
    g1, g2 = item
    if g1 == 0 and g2 == 0:
        return (g1, g2, float("nan"))
    return (g1, g2, cost(m_des, actual_magnetization((g1, g2), spec)))


def surface_rows(config: TrainingConfig, g1_max=0.05, g2_max=0.05, points=41, jobs=1):
    """Cost over a rectangle of couplings, long format."""
    spec = config.spec
    grid = [(float(a), float(b)) for a in np.linspace(0, g1_max, points) for b in np.linspace(0, g2_max, points)]
    rows = pmap(partial(_surface_point, spec=spec, m_des=config.m_des), grid, jobs)
    return ["j", "g1", "g2", "cost"], [(config.j,) + r for r in rows]
