"""
Repeated-interaction (collision model) dynamics of the probe spin.

Every collision couples the probe to one fresh unit from each reservoir
through the interaction-picture exchange Hamiltonian

    H = sum_i g_i (S+ (x) sigma_i^- + S- (x) sigma_i^+),

evolves the joint state for a time ``tau`` and traces the units out again.
The reduced map is stored as a set of Kraus operators so long runs never
rebuild the joint state.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotConvergedError
from .spin import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    QubitState,
    SpinOperators,
    check_spin,
    make_spin_operators,
    normalized_magnetization,
    reservoir_unit_state,
)

logger = logging.getLogger(__name__)

MAX_RESERVOIRS = 4
PROPAGATOR_MODES = ("exact", "second-order")
COLLISION_MODELS = ("simultaneous", "mixture")


@dataclass(frozen=True)
class ReservoirSpec:
    """One information reservoir: Bloch angles of its units and the coupling."""

    theta: float
    phi: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        if self.g < 0:
            raise ValueError(f"coupling must be non-negative, got {self.g}")

    def unit_state(self, phase_averaged: bool = False) -> QubitState:
        state = reservoir_unit_state(self.theta, self.phi)
        return state.dephased() if phase_averaged else state

    @classmethod
    def from_sigma_z(cls, sigma_z: float, g: float, phi: float = 0.0) -> "ReservoirSpec":
        if not -1.0 <= sigma_z <= 1.0:
            raise ValueError(f"<sigma_z> must lie in [-1, 1], got {sigma_z}")
        return cls(theta=float(np.arccos(sigma_z)), phi=phi, g=g)


def reservoir_weights(reservoirs) -> np.ndarray:
    """Probabilities P_i = g_i / sum_j g_j."""
    g = np.array([res.g for res in reservoirs], dtype=float)
    total = g.sum()
    if total <= 0:
        raise ValueError("at least one coupling must be positive")
    return g / total


@dataclass(frozen=True)
class CollisionConfig:
    """Parameters of a collision-model run.

    ``omega0`` and ``omega_res`` are carried for bookkeeping only: the
    dynamics are computed in the interaction picture at resonance.
    ``phase_averaged`` replaces every unit by its dephased counterpart
    (populations kept, coherences dropped).
    """

    j: float
    reservoirs: tuple[ReservoirSpec, ...]
    tau: float
    n_collisions: int = 1
    propagator: str = "exact"
    r: float = 1.0
    omega0: float = 1.0
    omega_res: float = 1.0
    phase_averaged: bool = False
    model: str = "simultaneous"
    snapshot_stride: int = 10

    def __post_init__(self):
        object.__setattr__(self, "j", check_spin(self.j))
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        if not 1 <= len(self.reservoirs) <= MAX_RESERVOIRS:
            raise ValueError(f"need between 1 and {MAX_RESERVOIRS} reservoirs, got {len(self.reservoirs)}")
        if self.tau <= 0:
            raise ValueError(f"interaction time must be positive, got {self.tau}")
        if self.n_collisions < 1:
            raise ValueError("n_collisions must be >= 1")
        if self.propagator not in PROPAGATOR_MODES:
            raise ValueError(f"propagator must be one of {PROPAGATOR_MODES}")
        if self.model not in COLLISION_MODELS:
            raise ValueError(f"model must be one of {COLLISION_MODELS}")
        if self.r <= 0:
            raise ValueError("collision rate r must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        gtau = max(res.g for res in self.reservoirs) * self.tau
        if gtau > 0.5:
            raise ValueError(f"g*tau = {gtau:.3g} is outside the weak-coupling regime (<= 0.5)")
        if gtau > 0.2:
            warnings.warn(f"g*tau = {gtau:.3g} is large for a weak-coupling collision model", stacklevel=3)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([res.g for res in self.reservoirs])


def interaction_hamiltonian(j, reservoirs) -> np.ndarray:
    """Joint exchange Hamiltonian, probe factor first then unit 1..N."""
    reservoirs = list(reservoirs)
    n = len(reservoirs)
    if n == 0:
        raise ValueError("need at least one reservoir")
    if n > MAX_RESERVOIRS:
        raise ValueError(f"joint space capped at {MAX_RESERVOIRS} reservoir units")
    ops = make_spin_operators(j)
    d = ops.dim
    h = np.zeros((d * 2**n, d * 2**n), dtype=complex)
    eye2 = np.eye(2)
    for i, res in enumerate(reservoirs):
        if res.g == 0:
            continue
        down = [eye2] * n
        up = [eye2] * n
        down[i] = SIGMA_MINUS
        up[i] = SIGMA_PLUS
        h += res.g * (np.kron(ops.splus, _kron_all(down)) + np.kron(ops.sminus, _kron_all(up)))
    return h


def _kron_all(mats) -> np.ndarray:
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def propagator(h: np.ndarray, tau: float, mode: str = "exact") -> np.ndarray:
    """exp(-i H tau), or its expansion to second order in tau."""
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12:
        raise ValueError("Hamiltonian is not Hermitian")
    if mode == "exact":
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * w * tau)) @ v.conj().T
    if mode == "second-order":
        eye = np.eye(h.shape[0])
        return eye - 1j * tau * h - 0.5 * tau**2 * (h @ h)
    raise ValueError(f"unknown propagator mode {mode!r}")


def _product_state(units) -> np.ndarray:
    return _kron_all([u.matrix for u in units])


def _kraus_operators(u: np.ndarray, d: int, env: np.ndarray) -> np.ndarray:
    """Kraus set of rho -> Tr_env[U (rho (x) env) U^dagger]."""
    de = env.shape[0]
    p, vecs = np.linalg.eigh(env)
    u4 = u.reshape(d, de, d, de)
    kraus = []
    for pa, va in zip(p, vecs.T):
        if pa < 1e-15:
            continue
        # K_{k,a} = sqrt(p_a) <k|_env U |a>_env
        ua = np.einsum("ikjl,l->kij", u4, va) * np.sqrt(pa)
        kraus.extend(ua)
    return np.array(kraus)


@dataclass
class CollisionChannel:
    """Reduced single-collision map on the probe, in Kraus form."""

    ops: SpinOperators
    kraus: np.ndarray = field(repr=False)

    @classmethod
    def from_config(cls, config: CollisionConfig) -> "CollisionChannel":
        ops = make_spin_operators(config.j)
        d = ops.dim
        units = [res.unit_state(config.phase_averaged) for res in config.reservoirs]
        if config.model == "simultaneous":
            h = interaction_hamiltonian(config.j, config.reservoirs)
            u = propagator(h, config.tau, config.propagator)
            kraus = _kraus_operators(u, d, _product_state(units))
        else:
            weights = reservoir_weights(config.reservoirs)
            parts = []
            for res, unit, w in zip(config.reservoirs, units, weights):
                if w == 0:
                    continue
                h = interaction_hamiltonian(config.j, [res])
                u = propagator(h, config.tau, config.propagator)
                parts.append(np.sqrt(w) * _kraus_operators(u, d, unit.matrix))
            kraus = np.concatenate(parts)
        return cls(ops, kraus)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.ops.dim, self.ops.dim):
            raise ValueError(f"state shape {rho.shape} does not match probe dimension {self.ops.dim}")
        out = np.einsum("kij,jl,kml->im", self.kraus, rho, self.kraus.conj(), optimize=True)
        return 0.5 * (out + out.conj().T)


def collide_once(rho: np.ndarray, config: CollisionConfig) -> np.ndarray:
    """One collision with fresh units from every reservoir."""
    return CollisionChannel.from_config(config).apply(rho)


@dataclass
class Trajectory:
    """Magnetization after every collision plus strided state snapshots."""

    collisions: np.ndarray
    elapsed: np.ndarray
    magnetization: np.ndarray
    snapshot_collisions: np.ndarray
    snapshots: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.collisions)

    @property
    def final_state(self) -> np.ndarray:
        return self.snapshots[-1]


def run_dynamics(rho0: np.ndarray, config: CollisionConfig) -> Trajectory:
    """Iterate ``config.n_collisions`` collisions starting from ``rho0``.

    Index 0 of the returned trajectory is the initial state. In
    second-order mode the truncated map gains trace at O((g tau)^4) per
    collision; the state is renormalized after each step.
    """
    if config.couplings.sum() <= 0:
        raise ValueError("at least one coupling must be positive")
    channel = CollisionChannel.from_config(config)
    n = config.n_collisions
    stride = config.snapshot_stride
    mags = np.empty(n + 1)
    snaps, snap_idx = [], []
    rho = np.array(rho0, dtype=complex)
    mags[0] = normalized_magnetization(rho, channel.ops)
    snaps.append(rho.copy())
    snap_idx.append(0)
    renormalize = config.propagator == "second-order"
    for k in range(1, n + 1):
        rho = channel.apply(rho)
        if renormalize:
            rho /= np.trace(rho).real
        mags[k] = normalized_magnetization(rho, channel.ops)
        if k % stride == 0 or k == n:
            snaps.append(rho.copy())
            snap_idx.append(k)
    idx = np.arange(n + 1)
    return Trajectory(idx, idx * config.tau, mags, np.array(snap_idx), np.array(snaps))


@dataclass(frozen=True)
class SteadyResult:
    value: float
    index: int


def detect_steady(traj, abs_tol: float = 1e-4, window: int = 100) -> SteadyResult:
    """First window of ``window`` samples whose spread is within ``abs_tol``.

    Returns the collision index at the start of that window and the window
    mean; raises :class:`NotConvergedError` if no window qualifies.
    """
    if window < 2:
        raise ValueError("window must hold at least 2 samples")
    if isinstance(traj, Trajectory):
        values, index = traj.magnetization, traj.collisions
    else:
        values = np.asarray(traj, dtype=float)
        index = np.arange(len(values))
    if len(values) < window:
        raise NotConvergedError(f"trajectory of length {len(values)} is shorter than the window ({window})")
    view = np.lib.stride_tricks.sliding_window_view(values, window)
    spread = view.max(axis=1) - view.min(axis=1)
    hits = np.flatnonzero(spread <= abs_tol)
    if hits.size == 0:
        raise NotConvergedError(
            f"no window of {window} samples settled within {abs_tol:g} (final spread {spread[-1]:.3g})"
        )
    first = hits[0]
    return SteadyResult(float(view[first].mean()), int(index[first]))
