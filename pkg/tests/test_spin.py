import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qneuron.spin import (
    QubitState,
    check_density_matrix,
    check_spin,
    clebsch_gordan,
    coherent_state_vector,
    expectation,
    m_values,
    make_polarization_basis,
    make_spin_operators,
    normalized_magnetization,
    reservoir_unit_state,
    spin_coherent_state,
    spin_dimension,
)

SPINS = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]
spins = st.sampled_from(SPINS)
thetas = st.floats(0.0, np.pi)
phis = st.floats(0.0, 2 * np.pi, exclude_max=True)


def random_state(d, rng):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("j", [0.5, "1/2", 1, "5/2", 4.5])
def test_check_spin_accepts(j):
    assert check_spin(j) in SPINS


@pytest.mark.parametrize("j", [0, -0.5, 0.3, "abc", float("nan"), None])
def test_check_spin_rejects(j):
    with pytest.raises(ValueError):
        check_spin(j)


@pytest.mark.parametrize("j", SPINS)
def test_dimension_and_m_values(j):
    m = m_values(j)
    assert spin_dimension(j) == 2 * j + 1 == len(m)
    assert np.all(np.diff(m) < 0)
    assert m[0] == j and m[-1] == -j


@pytest.mark.parametrize("j", SPINS)
def test_commutators(j):
    ops = make_spin_operators(j)
    x, y, z = ops.sx, ops.sy, ops.sz
    for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
        assert np.max(np.abs(a @ b - b @ a - 1j * c)) < 1e-12


@pytest.mark.parametrize("j", SPINS)
def test_operator_structure(j):
    ops = make_spin_operators(j)
    for op in (ops.sx, ops.sy, ops.sz):
        np.testing.assert_allclose(op, op.conj().T, atol=1e-15)
    np.testing.assert_allclose(ops.splus, ops.sx + 1j * ops.sy, atol=1e-15)
    np.testing.assert_allclose(ops.sminus, ops.sx - 1j * ops.sy, atol=1e-15)
    np.testing.assert_array_equal(np.diag(ops.sz).real, m_values(j))
    casimir = ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz
    np.testing.assert_allclose(casimir, j * (j + 1) * np.eye(ops.dim), atol=1e-12)
    m = m_values(j)
    for k in range(1, ops.dim):
        assert ops.splus[k - 1, k] == pytest.approx(np.sqrt(j * (j + 1) - m[k] * (m[k] + 1)))


def test_spin_one_matches_reference():
    ops = make_spin_operators(1)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(ops.sx, s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), atol=1e-15)
    np.testing.assert_allclose(ops.sy, s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]), atol=1e-15)
    np.testing.assert_allclose(ops.sz, np.diag([1, 0, -1]), atol=1e-15)


def test_spin_half_is_pauli_over_two():
    ops = make_spin_operators(0.5)
    np.testing.assert_allclose(ops.sx, [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(ops.sy, [[0, -0.5j], [0.5j, 0]])
    np.testing.assert_allclose(ops.sz, [[0.5, 0], [0, -0.5]])


def test_operators_are_read_only():
    ops = make_spin_operators(1)
    with pytest.raises(ValueError):
        ops.sz[0, 0] = 3


@settings(max_examples=60, deadline=None)
@given(spins, thetas, phis)
def test_coherent_state_norm_and_magnetization(j, theta, phi):
    psi = coherent_state_vector(j, theta, phi)
    assert np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-12)
    ops = make_spin_operators(j)
    rho = spin_coherent_state(j, theta, phi)
    assert expectation(rho, ops.sz).real == pytest.approx(j * np.cos(theta), abs=1e-10)
    # points along (theta, phi)
    assert expectation(rho, ops.sx).real == pytest.approx(j * np.sin(theta) * np.cos(phi), abs=1e-10)
    assert expectation(rho, ops.sy).real == pytest.approx(j * np.sin(theta) * np.sin(phi), abs=1e-10)


def test_coherent_state_examples():
    np.testing.assert_allclose(spin_coherent_state(0.5, 0.0), [[1, 0], [0, 0]])
    np.testing.assert_allclose(coherent_state_vector(1, np.pi / 2), [0.5, 1 / np.sqrt(2), 0.5], atol=1e-15)
    for j in SPINS:
        rho = spin_coherent_state(j, np.pi / 2, 0.0)
        assert normalized_magnetization(rho, make_spin_operators(j)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("theta, phi", [(-0.1, 0.0), (3.2, 0.0), (1.0, -0.1), (1.0, 2 * np.pi)])
def test_angles_out_of_range(theta, phi):
    with pytest.raises(ValueError):
        spin_coherent_state(1, theta, phi)
    with pytest.raises(ValueError):
        reservoir_unit_state(theta, phi)


def test_reservoir_unit_examples():
    u = reservoir_unit_state(0.0)
    np.testing.assert_allclose(u.matrix, np.diag([1, 0]))
    assert u.p_e == 1.0
    np.testing.assert_allclose(reservoir_unit_state(np.pi / 2).matrix, 0.5 * np.ones((2, 2)), atol=1e-15)
    u = reservoir_unit_state(2 * np.pi / 3)
    np.testing.assert_allclose(np.diag(u.matrix).real, [0.25, 0.75], atol=1e-15)
    assert u.e_minus.real == pytest.approx(np.sqrt(3) / 4)


@settings(max_examples=80, deadline=None)
@given(thetas, phis)
def test_reservoir_unit_invariants(theta, phi):
    u = reservoir_unit_state(theta, phi)
    rho = u.matrix
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)
    assert u.p_e + u.p_g == pytest.approx(1.0, abs=1e-15)
    assert u.e_plus == pytest.approx(np.conj(u.e_minus))
    assert u.p_e == pytest.approx((1 + np.cos(theta)) / 2)
    assert abs(u.e_minus) == pytest.approx(abs(np.sin(theta)) / 2, abs=1e-15)
    d = u.dephased()
    assert isinstance(d, QubitState)
    assert d.e_minus == 0 and d.p_e == u.p_e


@pytest.mark.parametrize(
    "args, expected",
    [
        ((0.5, 0.5, 0.5, -0.5, 1, 0), np.sqrt(0.5)),
        ((0.5, 0.5, 0.5, -0.5, 0, 0), np.sqrt(0.5)),
        ((0.5, -0.5, 0.5, 0.5, 0, 0), -np.sqrt(0.5)),
        ((1, 1, 1, -1, 2, 0), np.sqrt(1 / 6)),
        ((1, 0, 1, 0, 1, 0), 0.0),
        ((1, 1, 0.5, -0.5, 1.5, 0.5), np.sqrt(1 / 3)),
        ((1, 1, 1, 0, 1, 0), 0.0),  # m1 + m2 != m
    ],
)
def test_clebsch_gordan_values(args, expected):
    assert clebsch_gordan(*args) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("j", [0.5, 1.0, 1.5, 2.5])
def test_polarization_basis_orthonormal(j):
    basis = make_polarization_basis(j)
    d = basis.dim
    assert len(basis.labels) == d * d - 1
    ops = basis.operators
    gram = np.einsum("aji,bji->ab", ops.conj(), ops)
    np.testing.assert_allclose(gram, np.eye(d * d - 1), atol=1e-10)
    for t in ops:
        assert abs(np.trace(t)) < 1e-12


def test_polarization_l1_components_follow_spin_operators():
    for j in (0.5, 1.0, 2.5):
        basis, ops = make_polarization_basis(j), make_spin_operators(j)
        t10 = basis.operator(1, 0)
        ratio = t10[np.abs(ops.sz) > 0] / np.diag(ops.sz)[np.abs(np.diag(ops.sz)) > 0]
        assert np.allclose(ratio, ratio[0])
        t11 = basis.operator(1, 1)
        mask = np.abs(ops.splus) > 0
        r = t11[mask] / ops.splus[mask]
        assert np.allclose(r, r[0])


@pytest.mark.parametrize("j", [0.5, 1.0, 2.0])
def test_polarization_round_trip(j):
    rng = np.random.default_rng(7)
    basis = make_polarization_basis(j)
    for _ in range(20):
        rho = random_state(basis.dim, rng)
        r = basis.decompose(rho)
        assert np.max(np.abs(basis.reconstruct(r) - rho)) < 1e-12


def test_normalized_magnetization_examples():
    for j in (0.5, 1.5, 4.5):
        ops = make_spin_operators(j)
        top = np.zeros((ops.dim, ops.dim))
        top[0, 0] = 1
        assert normalized_magnetization(top, ops) == 1.0
        assert normalized_magnetization(np.eye(ops.dim) / ops.dim, ops) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        normalized_magnetization(np.eye(3) / 3, make_spin_operators(0.5))


def test_check_density_matrix():
    rho = np.diag([0.7, 0.3]).astype(complex)
    assert check_density_matrix(rho, 2) is not None
    with pytest.raises(ValueError):
        check_density_matrix(rho, 3)
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([0.7, 0.4]))
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
