"""
Coarse-grained master equation for the probe spin.

Collisions arriving at Poisson rate ``r`` turn the single-collision map into
the generator ``r * (Phi - id)``.  Expanding the propagator to second order
in ``tau`` and tracing the units out gives

    d rho/dt = -i[H_eff, rho]
               + (gamma2+ + delta) L[S+] + (gamma2- + delta) L[S-]
               + (gamma3+ / 2) Ls[S-] + (gamma3- / 2) Ls[S+]

with L[o] = 2 o rho o^dag - o^dag o rho - rho o^dag o and
Ls[o] = 2 o rho o - o^2 rho - rho o^2.  ``delta`` collects the cross-unit
terms g_i g_j <sigma_i^+><sigma_j^-> (i != j) of the collective dissipator;
``form="reduced"`` drops it and weights the squeezing terms by gamma3 itself,
the commonly quoted truncation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .collision import CollisionChannel, CollisionConfig, ReservoirSpec, MAX_RESERVOIRS
from .exceptions import NumericalError
from .spin import (
    SpinOperators,
    check_spin,
    make_spin_operators,
    normalized_magnetization,
)

logger = logging.getLogger(__name__)

RHS_FORMS = ("derived", "reduced")


@dataclass(frozen=True)
class LindbladSpec:
    j: float
    reservoirs: tuple[ReservoirSpec, ...]
    tau: float
    r: float = 1.0
    phase_averaged: bool = False

    def __post_init__(self):
        object.__setattr__(self, "j", check_spin(self.j))
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        if not self.reservoirs:
            raise ValueError("need at least one reservoir")
        if len(self.reservoirs) > MAX_RESERVOIRS:
            raise ValueError(f"at most {MAX_RESERVOIRS} reservoirs are supported")
        if self.r <= 0 or self.tau <= 0:
            raise ValueError("r and tau must be positive")

    @property
    def units(self):
        return [res.unit_state(self.phase_averaged) for res in self.reservoirs]

    @property
    def couplings(self) -> np.ndarray:
        return np.array([res.g for res in self.reservoirs], dtype=float)

    def with_couplings(self, g) -> "LindbladSpec":
        res = tuple(ReservoirSpec(r.theta, r.phi, float(gi)) for r, gi in zip(self.reservoirs, g))
        return LindbladSpec(self.j, res, self.tau, self.r, self.phase_averaged)

    def collision_config(self, propagator: str = "exact") -> CollisionConfig:
        return CollisionConfig(
            j=self.j,
            reservoirs=self.reservoirs,
            tau=self.tau,
            r=self.r,
            propagator=propagator,
            phase_averaged=self.phase_averaged,
        )


@dataclass(frozen=True)
class LindbladCoefficients:
    """Rates of the master equation.

    gamma1 carries the factor i, so the effective drive is
    H_eff = -i (gamma1- S+ + gamma1+ S-).
    """

    j: float
    gamma1_plus: complex
    gamma1_minus: complex
    gamma2_plus: float
    gamma2_minus: float
    gamma3_plus: complex
    gamma3_minus: complex
    delta: float
    xi_plus: np.ndarray = field(repr=False)
    xi_minus: np.ndarray = field(repr=False)
    xi_s_plus: np.ndarray = field(repr=False)
    xi_s_minus: np.ndarray = field(repr=False)


def lindblad_coefficients(spec: LindbladSpec) -> LindbladCoefficients:
    r, tau = spec.r, spec.tau
    g = spec.couplings
    units = spec.units
    e_plus = np.array([u.e_plus for u in units])
    e_minus = np.array([u.e_minus for u in units])
    p_e = np.array([u.p_e for u in units])
    p_g = np.array([u.p_g for u in units])
    n = len(units)

    xi_plus = r * tau**2 * p_e / 2
    xi_minus = r * tau**2 * p_g / 2
    xi_s_plus = np.zeros((n, n), dtype=complex)
    xi_s_minus = np.zeros((n, n), dtype=complex)
    g3p = g3m = 0j
    for a in range(n):
        for b in range(a + 1, n):
            xi_s_plus[a, b] = 2 * r * tau**2 * e_plus[a] * e_plus[b]
            xi_s_minus[a, b] = 2 * r * tau**2 * e_minus[a] * e_minus[b]
            g3p += g[a] * g[b] * xi_s_plus[a, b]
            g3m += g[a] * g[b] * xi_s_minus[a, b]

    collective = abs(np.sum(g * e_minus)) ** 2 - np.sum(g**2 * np.abs(e_minus) ** 2)
    return LindbladCoefficients(
        j=spec.j,
        gamma1_plus=1j * r * tau * np.sum(g * e_plus),
        gamma1_minus=1j * r * tau * np.sum(g * e_minus),
        gamma2_plus=float(np.sum(g**2 * xi_plus)),
        gamma2_minus=float(np.sum(g**2 * xi_minus)),
        gamma3_plus=complex(g3p),
        gamma3_minus=complex(g3m),
        delta=float(r * tau**2 * collective / 2),
        xi_plus=xi_plus,
        xi_minus=xi_minus,
        xi_s_plus=xi_s_plus,
        xi_s_minus=xi_s_minus,
    )


def _dissipator(o, rho):
    od = o.conj().T
    return 2 * o @ rho @ od - od @ o @ rho - rho @ od @ o


def _squeezing(o, rho):
    o2 = o @ o
    return 2 * o @ rho @ o - o2 @ rho - rho @ o2


def effective_hamiltonian(coeffs: LindbladCoefficients, ops: SpinOperators | None = None) -> np.ndarray:
    ops = ops or make_spin_operators(coeffs.j)
    return -1j * (coeffs.gamma1_minus * ops.splus + coeffs.gamma1_plus * ops.sminus)


def lindblad_rhs(
    rho: np.ndarray,
    coeffs: LindbladCoefficients,
    ops: SpinOperators | None = None,
    form: str = "derived",
) -> np.ndarray:
    """d rho/dt of the second-order master equation (see module docstring)."""
    if form not in RHS_FORMS:
        raise ValueError(f"form must be one of {RHS_FORMS}")
    ops = ops or make_spin_operators(coeffs.j)
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"state shape {rho.shape} does not match spin-{coeffs.j} probe")
    h = effective_hamiltonian(coeffs, ops)
    sp, sm = ops.splus, ops.sminus
    if form == "derived":
        w_sq, delta = 0.5, coeffs.delta
    else:
        w_sq, delta = 1.0, 0.0
    out = -1j * (h @ rho - rho @ h)
    out += (coeffs.gamma2_plus + delta) * _dissipator(sp, rho)
    out += (coeffs.gamma2_minus + delta) * _dissipator(sm, rho)
    if coeffs.gamma3_plus != 0:
        out += w_sq * coeffs.gamma3_plus * _squeezing(sm, rho)
    if coeffs.gamma3_minus != 0:
        out += w_sq * coeffs.gamma3_minus * _squeezing(sp, rho)
    return out


def coarse_grained_rhs(rho: np.ndarray, spec: LindbladSpec, mode: str = "exact") -> np.ndarray:
    """r * Tr_R[U (rho (x) rho_R) U^dag - rho (x) rho_R], no expansion of the trace."""
    channel = CollisionChannel.from_config(spec.collision_config(mode))
    return spec.r * (channel.apply(rho) - rho)


def liouvillian(coeffs: LindbladCoefficients, form: str = "derived") -> np.ndarray:
    """Superoperator of ``lindblad_rhs`` on column-stacked density matrices.

    Built from vec(A X B) = (B^T kron A) vec(X); ``lindblad_rhs`` is the
    independent matrix-level route.
    """
    if form not in RHS_FORMS:
        raise ValueError(f"form must be one of {RHS_FORMS}")
    ops = make_spin_operators(coeffs.j)
    eye = np.eye(ops.dim)
    h = effective_hamiltonian(coeffs, ops)
    w_sq, delta = (0.5, coeffs.delta) if form == "derived" else (1.0, 0.0)

    def diss(o):
        oho = o.conj().T @ o
        return 2 * np.kron(o.conj(), o) - np.kron(eye, oho) - np.kron(oho.T, eye)

    def squeeze(o):
        o2 = o @ o
        return 2 * np.kron(o.T, o) - np.kron(eye, o2) - np.kron(o2.T, eye)

    lv = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    lv += (coeffs.gamma2_plus + delta) * diss(ops.splus)
    lv += (coeffs.gamma2_minus + delta) * diss(ops.sminus)
    lv += w_sq * coeffs.gamma3_plus * squeeze(ops.sminus)
    lv += w_sq * coeffs.gamma3_minus * squeeze(ops.splus)
    return lv


def steady_state(spec: LindbladSpec, form: str = "derived", residual_tol: float = 1e-10) -> np.ndarray:
    """Unit-trace null vector of the Liouvillian (smallest singular value).

    Raises :class:`NumericalError` when the null space is more than
    one-dimensional or the residual exceeds ``residual_tol``.
    """
    if spec.couplings.sum() <= 0:
        raise ValueError("at least one coupling must be positive")
    coeffs = lindblad_coefficients(spec)
    lv = liouvillian(coeffs, form)
    d = int(round(sqrt(lv.shape[0])))
    _, s, vh = np.linalg.svd(lv)
    if s[-2] <= 1e-10 * s[0]:
        raise NumericalError(
            f"steady state is not unique: singular values {s[-2]:.3e}, {s[-1]:.3e} (scale {s[0]:.3e})"
        )
    rho = vh[-1].conj().reshape(d, d, order="F")
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.max(np.abs(lv @ rho.reshape(-1, order="F")))
    if residual > residual_tol:
        raise NumericalError(f"steady-state residual {residual:.3e} exceeds {residual_tol:.1e}")
    return rho


def steady_magnetization(spec: LindbladSpec, form: str = "derived") -> float:
    return normalized_magnetization(steady_state(spec, form), make_spin_operators(spec.j))


@dataclass
class MasterTrajectory:
    times: np.ndarray
    magnetization: np.ndarray
    trace: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray = field(repr=False)


def integrate(
    rho0: np.ndarray,
    spec: LindbladSpec,
    t_end: float,
    dt: float,
    form: str = "derived",
    snapshot_stride: int = 10,
    positivity_atol: float = 1e-10,
) -> MasterTrajectory:
    """Fixed-step RK4 integration of the master equation."""
    coeffs = lindblad_coefficients(spec)
    ops = make_spin_operators(spec.j)
    g2 = float(np.sum(spec.couplings**2))
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    if g2 > 0 and dt > 0.1 / (spec.r * spec.tau**2 * g2):
        raise ValueError(f"dt = {dt:g} exceeds the stability bound {0.1 / (spec.r * spec.tau**2 * g2):.3g}")
    # RK4 is stable up to |lambda dt| ~ 2.8 on the imaginary axis
    radius = np.max(np.abs(np.linalg.eigvals(liouvillian(coeffs, form))))
    if radius * dt > 2.5:
        raise ValueError(f"dt = {dt:g} is too large for the drive (spectral radius {radius:.3g})")

    def f(x):
        return lindblad_rhs(x, coeffs, ops, form)

    n_steps = int(round(t_end / dt))
    rho = np.array(rho0, dtype=complex)
    times = np.arange(n_steps + 1) * dt
    mags = np.empty(n_steps + 1)
    traces = np.empty(n_steps + 1)
    mags[0] = normalized_magnetization(rho / np.trace(rho), ops)
    traces[0] = np.trace(rho).real
    snaps, snap_t = [rho.copy()], [0.0]
    for k in range(1, n_steps + 1):
        k1 = f(rho)
        k2 = f(rho + 0.5 * dt * k1)
        k3 = f(rho + 0.5 * dt * k2)
        k4 = f(rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        traces[k] = np.trace(rho).real
        mags[k] = np.trace(rho @ ops.sz).real / spec.j
        if k % snapshot_stride == 0 or k == n_steps:
            low = np.linalg.eigvalsh(rho).min()
            if low < -positivity_atol:
                raise NumericalError(f"state lost positivity at t = {times[k]:g} (min eigenvalue {low:.3e})")
            snaps.append(rho.copy())
            snap_t.append(times[k])
    return MasterTrajectory(times, mags, traces, np.array(snap_t), np.array(snaps))


def _rates(reservoirs):
    g2 = np.array([res.g for res in reservoirs], dtype=float) ** 2
    units = [res.unit_state() for res in reservoirs]
    p_e = np.array([u.p_e for u in units])
    p_g = np.array([u.p_g for u in units])
    return float(g2 @ p_e), float(g2 @ p_g)


def steady_magnetization_closed_form(j, reservoirs) -> float:
    """Closed-form steady normalized magnetization for J = 1/2 or J = 1.

    With A = sum g_i^2 p_e,i and B = sum g_i^2 p_g,i this is
    (A - B) / (A + B) for J = 1/2 and (A^2 - B^2) / (A^2 + B^2 + A B)
    for J = 1. Only unit populations enter.
    """
    j = check_spin(j)
    a, b = _rates(reservoirs)
    if a + b <= 0:
        raise ValueError("all couplings are zero")
    if j == 0.5:
        return (a - b) / (a + b)
    if j == 1.0:
        return (a * a - b * b) / (a * a + b * b + a * b)
    raise ValueError(f"closed form is only available for J = 1/2 and J = 1, got {j}")


def two_reservoir_quotient(g1: float, g2: float, p_e1: float, p_e2: float, j=1.0) -> tuple[float, float]:
    """Numerator X and denominator Y of the two-reservoir steady magnetization.

    For J = 1 the cross term of Y is g1^2 g2^2 (1 + p_e1 p_e2 + p_g1 p_g2),
    the expansion of A^2 + B^2 + A B.
    """
    j = check_spin(j)
    p_g1, p_g2 = 1 - p_e1, 1 - p_e2
    s1, s2 = p_e1 - p_g1, p_e2 - p_g2
    if j == 0.5:
        x = g1**2 * s1 + g2**2 * s2
        y = g1**2 + g2**2
    elif j == 1.0:
        x = g1**4 * s1 + g2**4 * s2 + 2 * g1**2 * g2**2 * (p_e1 * p_e2 - p_g1 * p_g2)
        y = (
            g1**4 * (1 - p_e1 * p_g1)
            + g2**4 * (1 - p_e2 * p_g2)
            + g1**2 * g2**2 * (1 + p_e1 * p_e2 + p_g1 * p_g2)
        )
    else:
        raise ValueError(f"closed form is only available for J = 1/2 and J = 1, got {j}")
    return x, y


def steady_coherences_closed_form(
    reservoirs, tau: float, r: float = 1.0, phase_averaged: bool = False
) -> tuple[float, float]:
    """(<Sx>_ss, <Sy>_ss) for J = 1 from the gamma1 rates.

    <Sx> = <Sz>_ss (gamma1- - gamma1+) / sqrt(2),
    <Sy> = i <Sz>_ss (gamma1- + gamma1+) / sqrt(2).
    """
    spec = LindbladSpec(1.0, tuple(reservoirs), tau, r, phase_averaged)
    coeffs = lindblad_coefficients(spec)
    sz = steady_magnetization_closed_form(1.0, reservoirs)
    sx = sz / sqrt(2) * (coeffs.gamma1_minus - coeffs.gamma1_plus)
    sy = 1j * sz / sqrt(2) * (coeffs.gamma1_minus + coeffs.gamma1_plus)
    for name, val in (("Sx", sx), ("Sy", sy)):
        if abs(val.imag) > 1e-12:
            raise NumericalError(f"closed-form <{name}> has imaginary part {val.imag:.3e}")
    return float(sx.real), float(sy.real)


def bloch_rates_j1(rho: np.ndarray, coeffs: LindbladCoefficients) -> tuple[complex, complex, complex]:
    """d<Sx>/dt, d<Sy>/dt, d<Sz>/dt for J = 1 in terms of populations and coherences.

    Entries are read from ``3 * rho`` so that P_nn and C_nm follow the
    1/3-normalized parametrization of the initial probe state.
    """
    if coeffs.j != 1.0 or rho.shape != (3, 3):
        raise ValueError("Bloch rates are written out for J = 1 only")
    m = 3 * rho
    p11, p22, p33 = m[0, 0], m[1, 1], m[2, 2]
    c12, c21, c23, c32 = m[0, 1], m[1, 0], m[1, 2], m[2, 1]
    g1p, g1m = coeffs.gamma1_plus, coeffs.gamma1_minus
    up = coeffs.gamma2_plus + coeffs.delta
    down = coeffs.gamma2_minus + coeffs.delta
    g3p, g3m = coeffs.gamma3_plus / 2, coeffs.gamma3_minus / 2
    r2 = sqrt(2) / 3
    sz0 = (p11 - p33) / 3
    dsx = r2 * (-up * (c12 + c21) - down * (c23 + c32) + g3p * (c12 + c23) + g3m * (c21 + c32)) + sz0 * (g1m - g1p)
    dsy = 1j * r2 * (-up * (c12 - c21) - down * (c23 - c32) - g3p * (c12 + c23) + g3m * (c21 + c32)) + 1j * sz0 * (
        g1m + g1p
    )
    dsz = r2 * (g1p * (c12 + c23) - g1m * (c21 + c32)) + 4 / 3 * (up * (p22 + p33) - down * (p11 + p22))
    return dsx, dsy, dsz
