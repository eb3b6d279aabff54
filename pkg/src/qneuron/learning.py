"""
Gradient descent on the reservoir coupling rates.

The neuron output is the steady normalized magnetization; the cost is
C = (m_des - m_act)^2 / 2 and every coupling moves by -eta dC/dg_i at each
step.  Reservoir units are phase averaged by default: the steady
magnetization then depends on unit populations only, which is the regime
where the closed forms hold.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .collision import ReservoirSpec
from .exceptions import DivergenceError, NumericalError
from .master_eq import (
    LindbladSpec,
    steady_magnetization,
    steady_magnetization_closed_form,
    two_reservoir_quotient,
)
from .spin import check_spin

logger = logging.getLogger(__name__)

GRADIENT_MODES = ("analytic", "numeric", "auto")
G_FLOOR = 1e-6


def cost(m_des: float, m_act: float) -> float:
    return 0.5 * (m_des - m_act) ** 2


@dataclass(frozen=True)
class TrainingConfig:
    """Everything needed to train the couplings of one neuron.

    ``m_des`` is a normalized magnetization (Tr[rho Sz] / J).
    ``reservoirs`` carry the initial couplings in their ``g`` fields.
    """

    j: float
    reservoirs: tuple[ReservoirSpec, ...]
    m_des: float
    eta: float
    max_iters: int = 10_000
    eps: float = 1e-8
    grad_mode: str = "auto"
    tau: float = 3.0
    r: float = 1.0
    phase_averaged: bool = True
    patience: int = 10

    def __post_init__(self):
        object.__setattr__(self, "j", check_spin(self.j))
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        if self.eta < 0:
            raise ValueError("learning rate must be non-negative")
        if not -1.0 <= self.m_des <= 1.0:
            raise ValueError(f"m_des must lie in [-1, 1], got {self.m_des}")
        if self.grad_mode not in GRADIENT_MODES:
            raise ValueError(f"grad_mode must be one of {GRADIENT_MODES}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    @property
    def spec(self) -> LindbladSpec:
        return LindbladSpec(self.j, self.reservoirs, self.tau, self.r, self.phase_averaged)

    @property
    def initial_couplings(self) -> np.ndarray:
        return np.array([res.g for res in self.reservoirs], dtype=float)


@dataclass
class TrainState:
    iteration: int
    couplings: np.ndarray
    cost: float
    gradient: np.ndarray
    m_act: float | np.ndarray
    clamped: list[int] = field(default_factory=list)


def analytic_available(j, n_reservoirs: int, phase_averaged: bool = True) -> bool:
    return check_spin(j) in (0.5, 1.0) and n_reservoirs == 2 and phase_averaged


def actual_magnetization(g, spec: LindbladSpec, closed_form: bool | None = None) -> float:
    """Steady normalized magnetization at couplings ``g``.

    Uses the closed form when it applies (J <= 1, phase-averaged units),
    otherwise the null-space solver.
    """
    if closed_form is None:
        closed_form = spec.j in (0.5, 1.0) and spec.phase_averaged
    target = spec.with_couplings(g)
    if closed_form:
        return steady_magnetization_closed_form(spec.j, target.reservoirs)
    return steady_magnetization(target)


def grad_cost_analytic(g, spec: LindbladSpec, m_des: float) -> np.ndarray:
    """dC/dg for two reservoirs and J in {1/2, 1} via the quotient rule on X/Y."""
    if not analytic_available(spec.j, len(spec.reservoirs), spec.phase_averaged):
        raise ValueError("analytic gradient needs J in {1/2, 1}, two reservoirs and phase-averaged units")
    g1, g2 = (float(x) for x in g)
    pe1, pe2 = (u.p_e for u in spec.units)
    pg1, pg2 = 1 - pe1, 1 - pe2
    s1, s2 = pe1 - pg1, pe2 - pg2
    x, y = two_reservoir_quotient(g1, g2, pe1, pe2, spec.j)
    if y == 0:
        raise NumericalError("steady magnetization undefined: all couplings are zero")
    if spec.j == 0.5:
        dx = np.array([2 * g1 * s1, 2 * g2 * s2])
        dy = np.array([2 * g1, 2 * g2])
    else:
        k = pe1 * pe2 - pg1 * pg2
        b = 1 + pe1 * pe2 + pg1 * pg2
        a1, a2 = 1 - pe1 * pg1, 1 - pe2 * pg2
        dx = np.array([4 * g1**3 * s1 + 4 * g1 * g2**2 * k, 4 * g2**3 * s2 + 4 * g1**2 * g2 * k])
        dy = np.array([4 * g1**3 * a1 + 2 * g1 * g2**2 * b, 4 * g2**3 * a2 + 2 * g1**2 * g2 * b])
    dm = (dx * y - dy * x) / y**2
    m_act = x / y
    return (m_des - m_act) * (-dm)


def grad_cost_numeric(g, spec: LindbladSpec, m_des: float, h=None) -> np.ndarray:
    """Finite-difference gradient, each point solved by the null-space solver.

    dm_act/dg_i is taken by central differences and combined through
    dC/dg_i = (m_des - m_act)(-dm_act/dg_i).  This agrees with the central
    difference of C itself to O(h^2) and vanishes exactly where
    m_act = m_des.  Default step per component: 1e-5 * max(g_i, 1e-6).
    Components whose step would make the coupling negative fall back to a
    forward difference.
    """
    g = np.asarray(g, dtype=float)
    steps = 1e-5 * np.maximum(g, G_FLOOR) if h is None else np.broadcast_to(np.asarray(h, dtype=float), g.shape)
    if np.any(steps <= 0):
        raise ValueError("finite-difference step must be positive")

    def m(gv):
        try:
            return steady_magnetization(spec.with_couplings(gv))
        except NumericalError as exc:
            raise NumericalError(f"solver failed at perturbed couplings {gv}: {exc}") from exc

    m0 = m(g)
    dm = np.empty_like(g)
    for i, hi in enumerate(steps):
        up, down = g.copy(), g.copy()
        up[i] += hi
        if g[i] - hi >= 0:
            down[i] -= hi
            dm[i] = (m(up) - m(down)) / (2 * hi)
        else:
            dm[i] = (m(up) - m0) / hi
    return (m_des - m0) * (-dm)


def _resolve_mode(mode: str, spec: LindbladSpec) -> str:
    if mode == "auto":
        return "analytic" if analytic_available(spec.j, len(spec.reservoirs), spec.phase_averaged) else "numeric"
    if mode == "analytic" and not analytic_available(spec.j, len(spec.reservoirs), spec.phase_averaged):
        raise ValueError(f"no analytic gradient for J = {spec.j} with {len(spec.reservoirs)} reservoirs")
    return mode


def objective_for(spec: LindbladSpec, m_des: float, grad_mode: str = "auto") -> Callable:
    """Return g -> (cost, gradient, m_act) for a single input."""
    mode = _resolve_mode(grad_mode, spec)

    def objective(g):
        m_act = actual_magnetization(g, spec, closed_form=(mode == "analytic"))
        if mode == "analytic":
            grad = grad_cost_analytic(g, spec, m_des)
        else:
            grad = grad_cost_numeric(g, spec, m_des)
        return cost(m_des, m_act), grad, m_act

    return objective


def descend(objective: Callable, g0, eta: float, max_iters: int, eps: float, patience: int = 10) -> list[TrainState]:
    """Plain gradient descent with non-negative clamping.

    Stops once the cost drops below ``eps`` or after ``max_iters`` updates.
    Raises :class:`DivergenceError` when the cost rises ``patience`` times
    in a row.
    """
    g = np.array(g0, dtype=float)
    history: list[TrainState] = []
    rises = 0
    clamped: list[int] = []
    for k in range(max_iters + 1):
        c, grad, m_act = objective(g)
        if not np.isfinite(c) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite cost or gradient at iteration {k}")
        history.append(TrainState(k, g.copy(), float(c), np.asarray(grad, dtype=float), m_act, clamped))
        if k > 0 and c > history[-2].cost:
            rises += 1
            if rises >= patience:
                raise DivergenceError(
                    f"cost increased for {patience} consecutive iterations (now {c:.3e}); try a smaller learning rate"
                )
        else:
            rises = 0
        if c < eps or k == max_iters:
            break
        g = g - eta * grad
        clamped = [int(i) for i in np.flatnonzero(g < 0)]
        if clamped:
            logger.info("iteration %d: clamped couplings %s at zero", k + 1, clamped)
            g[clamped] = 0.0
    return history


def reachable_range(spec: LindbladSpec) -> tuple[float, float]:
    """Steady magnetizations of each reservoir on its own (their hull bounds m_act)."""
    vals = []
    for res in spec.reservoirs:
        single = LindbladSpec(spec.j, (ReservoirSpec(res.theta, res.phi, 1.0),), spec.tau, spec.r, spec.phase_averaged)
        vals.append(steady_magnetization(single))
    return min(vals), max(vals)


def train(config: TrainingConfig) -> list[TrainState]:
    """Train the couplings of ``config`` and return every iterate."""
    spec = config.spec
    lo, hi = reachable_range(spec)
    if not lo - 1e-12 <= config.m_des <= hi + 1e-12:
        warnings.warn(
            f"m_des = {config.m_des} lies outside the reachable range [{lo:.4g}, {hi:.4g}]", stacklevel=2
        )
    objective = objective_for(spec, config.m_des, config.grad_mode)
    return descend(objective, config.initial_couplings, config.eta, config.max_iters, config.eps, config.patience)
