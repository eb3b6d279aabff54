"""
Spin-J algebra for the probe and the qubit reservoir units.

Basis convention: index ``k`` of a spin-J matrix corresponds to the
projection ``m = J - k`` (top state first), so ``Sz = diag(J, ..., -J)``.
Qubit matrices use the ordering (excited, ground), which makes
``sigma_plus = |e><g| = [[0, 1], [0, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial, sqrt

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
POSITIVITY_ATOL = 1e-10

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def check_spin(j) -> float:
    """Validate a spin quantum number and return it as a float.

    Accepts ints, floats, strings such as ``"5/2"`` and Fractions.
    """
    try:
        val = float(Fraction(j)) if isinstance(j, str) else float(j)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValueError(f"invalid spin quantum number {j!r}") from None
    twice = 2 * val
    if not np.isfinite(val) or val <= 0 or abs(twice - round(twice)) > 1e-9:
        raise ValueError(f"spin must be a positive multiple of 1/2, got {j!r}")
    return round(twice) / 2


def spin_dimension(j) -> int:
    return int(round(2 * check_spin(j))) + 1


def m_values(j) -> np.ndarray:
    """Projections ``J, J-1, ..., -J`` (strictly decreasing)."""
    j = check_spin(j)
    return j - np.arange(spin_dimension(j))


@dataclass(frozen=True)
class SpinOperators:
    j: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    splus: np.ndarray
    sminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.sz.shape[0]


def make_spin_operators(j) -> SpinOperators:
    """Build Sx, Sy, Sz and the ladder operators for spin ``j``.

    Matrix elements follow <m+1|S+|m> = sqrt(j(j+1) - m(m+1)).
    """
    j = check_spin(j)
    m = m_values(j)
    d = len(m)
    splus = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        # row k-1 holds m+1 when column k holds m
        splus[k - 1, k] = sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    sminus = splus.conj().T.copy()
    sx = (splus + sminus) / 2
    sy = (splus - sminus) / 2j
    sz = np.diag(m).astype(complex)
    for arr in (sx, sy, sz, splus, sminus):
        arr.setflags(write=False)
    return SpinOperators(j, sx, sy, sz, splus, sminus)


def _check_angles(theta: float, phi: float) -> None:
    if not (0.0 <= theta <= np.pi + 1e-12):
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    if not (0.0 <= phi < 2 * np.pi):
        raise ValueError(f"phi must lie in [0, 2pi), got {phi}")


def coherent_state_vector(j, theta: float, phi: float = 0.0) -> np.ndarray:
    """Amplitudes of the spin coherent state pointing along (theta, phi)."""
    j = check_spin(j)
    _check_angles(theta, phi)
    twoj = int(round(2 * j))
    c, s = np.cos(theta / 2), np.sin(theta / 2) * np.exp(1j * phi)
    amps = np.empty(twoj + 1, dtype=complex)
    for k in range(twoj + 1):
        # k = j - m
        amps[k] = sqrt(comb(twoj, k)) * c ** (twoj - k) * s**k
    return amps


def spin_coherent_state(j, theta: float, phi: float = 0.0) -> np.ndarray:
    """Density matrix of the spin coherent state; <Sz> = j cos(theta)."""
    psi = coherent_state_vector(j, theta, phi)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class QubitState:
    """A reservoir unit, with the expectations that enter the master equation."""

    matrix: np.ndarray

    @property
    def p_e(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def p_g(self) -> float:
        return float(self.matrix[1, 1].real)

    @property
    def e_minus(self) -> complex:
        # <sigma_-> = Tr[sigma_- rho] = rho[0, 1]
        return complex(self.matrix[0, 1])

    @property
    def e_plus(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def sigma_z(self) -> float:
        return self.p_e - self.p_g

    def dephased(self) -> "QubitState":
        """Phase-averaged copy: same populations, coherences removed."""
        return QubitState(np.diag(np.diag(self.matrix)).astype(complex))


def reservoir_unit_state(theta: float, phi: float = 0.0) -> QubitState:
    _check_angles(theta, phi)
    ct, st = np.cos(theta), np.sin(theta)
    rho = np.array(
        [
            [(1 + ct) / 2, np.exp(-1j * phi) * st / 2],
            [np.exp(1j * phi) * st / 2, (1 - ct) / 2],
        ],
        dtype=complex,
    )
    return QubitState(rho)


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> from the explicit Racah sum.

    All arguments may be half-integers; they are handled as doubled ints
    so the factorials stay exact.
    """
    J1, M1, J2, M2, J, M = (int(round(2 * x)) for x in (j1, m1, j2, m2, j, m))
    if M1 + M2 != M:
        return 0.0
    if not (abs(J1 - J2) <= J <= J1 + J2) or (J1 + J2 + J) % 2:
        return 0.0
    if abs(M1) > J1 or abs(M2) > J2 or abs(M) > J:
        return 0.0
    if (J1 + M1) % 2 or (J2 + M2) % 2 or (J + M) % 2:
        return 0.0

    def f(x2: int) -> int:
        return factorial(x2 // 2)

    pref = Fraction(
        (J + 1)
        * f(J + J1 - J2)
        * f(J - J1 + J2)
        * f(J1 + J2 - J)
        * f(J + M)
        * f(J - M)
        * f(J1 - M1)
        * f(J1 + M1)
        * f(J2 - M2)
        * f(J2 + M2),
        f(J1 + J2 + J + 2),
    )
    total = Fraction(0)
    kmin = max(0, (J2 - J - M1) // 2, (J1 - J + M2) // 2)
    kmax = min((J1 + J2 - J) // 2, (J1 - M1) // 2, (J2 + M2) // 2)
    for k in range(kmin, kmax + 1):
        den = (
            factorial(k)
            * f(J1 + J2 - J - 2 * k)
            * f(J1 - M1 - 2 * k)
            * f(J2 + M2 - 2 * k)
            * f(J - J2 + M1 + 2 * k)
            * f(J - J1 - M2 + 2 * k)
        )
        total += Fraction((-1) ** k, den)
    return float(total) * sqrt(pref)


@dataclass(frozen=True)
class PolarizationBasis:
    """Orthonormal spherical tensor operators T_lm, 1 <= l <= 2J."""

    j: float
    labels: list[tuple[int, int]]
    operators: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def operator(self, l: int, m: int) -> np.ndarray:
        return self.operators[self.labels.index((l, m))]

    def decompose(self, rho: np.ndarray) -> np.ndarray:
        """Generalized Bloch vector r_lm = Tr[T_lm^dagger rho]."""
        return np.einsum("kji,ji->k", self.operators.conj(), rho)

    def reconstruct(self, r: np.ndarray, trace: float = 1.0) -> np.ndarray:
        return trace * np.eye(self.dim) / self.dim + np.einsum("k,kij->ij", r, self.operators)


def make_polarization_basis(j) -> PolarizationBasis:
    j = check_spin(j)
    m = m_values(j)
    d = len(m)
    labels, ops = [], []
    for l in range(1, d):
        norm = sqrt((2 * l + 1) / d)
        for q in range(l, -l - 1, -1):
            t = np.zeros((d, d), dtype=complex)
            for a, ma in enumerate(m):
                for b, mb in enumerate(m):
                    if abs(ma - mb - q) < 1e-9:
                        t[a, b] = norm * clebsch_gordan(j, mb, l, q, j, ma)
            labels.append((l, q))
            ops.append(t)
    return PolarizationBasis(j, labels, np.array(ops))


def check_density_matrix(rho: np.ndarray, dim: int | None = None, positivity_atol: float = POSITIVITY_ATOL) -> np.ndarray:
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} density matrix, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_ATOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_ATOL:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3e}, not 1")
    if np.linalg.eigvalsh(rho).min() < -positivity_atol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def normalized_magnetization(rho: np.ndarray, ops: SpinOperators) -> float:
    """Tr[rho Sz] / J."""
    if rho.shape != ops.sz.shape:
        raise ValueError(f"state of shape {rho.shape} does not match spin-{ops.j} operators")
    val = np.trace(rho @ ops.sz) / ops.j
    if abs(val.imag) > 1e-12:
        raise ValueError(f"magnetization has imaginary residue {val.imag:.3e}")
    return float(val.real)


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    return complex(np.einsum("ij,ji->", rho, op))
