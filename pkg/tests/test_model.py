from fractions import Fraction
from math import comb

import numpy as np
import pytest

from pairsolve.model import (MAX_DIM, CapacityError, Coupling, LevelSet, Sector, StateVector,
                             apply_hamiltonian, apply_operator, basis_index, build_hamiltonian,
                             diagonalize_sector, enumerate_sector_basis, fock_matrix,
                             parse_run_config, particle_hole_transform, run_config_dict,
                             sector_spectrum, spectrum_csv)


def dense_hamiltonian(levels, G, L, M):
    """Independent construction straight from the definition."""
    basis = enumerate_sector_basis(Sector(L, M))
    z = levels.z
    H = np.zeros((len(basis), len(basis)))
    for i, c in enumerate(basis):
        H[i, i] = sum(z[l] ** 2 for l in c)
        for j, d in enumerate(basis):
            gone, new = set(c) - set(d), set(d) - set(c)
            if len(gone) == 1:
                # <d| Q^dag Q |c> moves one pair from k to l
                (k,), (l,) = gone, new
                H[j, i] = -G * z[k] * z[l]
    return H


def test_preset_paper8_levels():
    lv = LevelSet.preset("paper8")
    assert lv.L == 8
    np.testing.assert_allclose(lv.epsilon, np.arange(1, 9) / 10)
    assert lv.z2[0] == pytest.approx(1.1 / 0.9, rel=1e-15)


def test_levelset_validation():
    with pytest.raises(ValueError):
        LevelSet.from_z2([1.0, 1.0])
    with pytest.raises(ValueError):
        LevelSet.from_z([-1.0, 2.0])
    with pytest.raises(ValueError):
        LevelSet.from_epsilon([1.0])


def test_inv4_closed_under_inversion():
    assert LevelSet.preset("inv4").is_inversion_closed()
    assert not LevelSet.preset("paper8").is_inversion_closed()


def test_coupling_parse_exact():
    c = Coupling.parse("1/2+1e-7")
    assert c.target == Fraction(1, 2)
    assert c.offset == 1e-7
    assert c.value == 0.5 + 1e-7
    assert Coupling.parse("-1/3").integer_inverse() == -3
    assert Coupling.parse("0.37").integer_inverse() is None
    assert Coupling.from_dict(c.to_dict()) == c


def test_sector_dimension_and_basis():
    s = Sector(8, 3)
    assert s.dim == 56 and s.P == 5
    basis = enumerate_sector_basis(s)
    assert len(basis) == 56 and basis[0] == (0, 1, 2)
    assert basis_index(s)[(5, 6, 7)] == 55
    assert Sector(4, 5).dim == 0


def test_capacity_limit(paper8):
    assert comb(16, 8) == MAX_DIM
    with pytest.raises(CapacityError):
        Sector(18, 9).check()


def test_hamiltonian_matches_definition(paper8):
    rng = np.random.default_rng(0)
    for M in range(9):
        G = rng.normal()
        H = build_hamiltonian(paper8, G, Sector(8, M))
        ref = dense_hamiltonian(paper8, G, 8, M)
        np.testing.assert_allclose(H, ref, atol=1e-13)


def test_two_level_closed_form():
    lv = LevelSet.from_z2([1.5, 2.5])
    G = 0.1
    E = sector_spectrum(lv, G, Sector(2, 1))
    a, b = lv.z2
    h = np.array([[a, -G * np.sqrt(a * b)], [-G * np.sqrt(a * b), b]])
    np.testing.assert_allclose(E, np.linalg.eigvalsh(h), atol=1e-14)


def test_filled_state_energy(paper8):
    chi = StateVector.filled(8)
    out = apply_hamiltonian(paper8, 0.37, chi)
    np.testing.assert_allclose(out.amplitudes, paper8.total * chi.amplitudes, atol=1e-12)


def test_particle_hole_involution(rng):
    s = Sector(6, 2)
    psi = StateVector(s, rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim))
    back = particle_hole_transform(particle_hole_transform(psi))
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)
    vac = particle_hole_transform(StateVector.vacuum(5))
    assert vac.sector == Sector(5, 5)


@pytest.mark.parametrize("M", range(7))
def test_spectral_reflection(levels6, M):
    G = 0.3
    a = sector_spectrum(levels6, G, Sector(6, M))
    b = levels6.total - sector_spectrum(levels6, -G, Sector(6, 6 - M))[::-1]
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_diagonalization_residual(paper8):
    E, V = diagonalize_sector(build_hamiltonian(paper8, 0.5, Sector(8, 4)))
    assert np.all(np.diff(E) >= 0)
    np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)


def _comm(A, B):
    return A @ B - B @ A


@pytest.fixture(scope="module")
def small_ops():
    lv = LevelSet.from_z([0.7, 1.1, 1.6, 2.3])
    ops = {k: fock_matrix(k, lv) for k in ("H0", "Q", "Qdag", "C0", "B0", "N")}
    return lv, ops


def test_pair_commutator(small_ops):
    lv, o = small_ops
    I = np.eye(o["N"].shape[0])
    lhs = _comm(o["Qdag"], o["Q"])
    assert np.max(np.abs(lhs - (2 * o["H0"] - lv.total * I))) <= 1e-12


@pytest.mark.parametrize("G", [0.3, -0.45, 1.7])
def test_zero_pair_dressing_commutators(small_ops, G):
    lv, o = small_ops
    L = lv.L
    H = fock_matrix("H", lv, G)
    I = np.eye(H.shape[0])
    N = o["N"]
    for J in range(1, 4):
        CJ = np.linalg.matrix_power(o["C0"], J)
        C1 = np.linalg.matrix_power(o["C0"], J - 1)
        rhs = J * o["Qdag"] @ C1 @ (G * L * I - 2 * G * N - G * J * I - I)
        assert np.max(np.abs(_comm(H, CJ) - rhs)) <= 1e-12
        BJ = np.linalg.matrix_power(o["B0"], J)
        B1 = np.linalg.matrix_power(o["B0"], J - 1)
        rhs = J * o["Q"] @ B1 @ (2 * G * N - G * L * I - G * J * I + I)
        assert np.max(np.abs(_comm(H, BJ) - rhs)) <= 1e-12


@pytest.mark.parametrize("G", [0.3, -0.45])
def test_mixed_duality_identity(small_ops, G):
    lv, o = small_ops
    H = fock_matrix("H", lv, G)
    Hm = fock_matrix("H", lv, -G)
    H0, Q = o["H0"], o["Q"]
    for K in range(1, 4):
        QK = np.linalg.matrix_power(Q, K)
        QK1 = np.linalg.matrix_power(Q, K - 1)
        assert np.max(np.abs(_comm(H0, QK) - K * QK1 @ _comm(H0, Q))) <= 1e-12
        lhs = _comm(H0, QK) - _comm(o["Qdag"], QK) @ Q
        rhs = -K * (H0 @ QK + QK @ H0) + K * lv.total * QK
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
        lhs = H @ QK + QK @ Hm
        rhs = (1 - K * G) * (H0 @ QK + QK @ H0) + K * G * lv.total * QK
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_operator_actions_match_fock_matrices(rng):
    lv = LevelSet.from_z([0.7, 1.1, 1.6, 2.3])
    for op in ("Q", "Qdag", "C0", "B0", "H0"):
        F = fock_matrix(op, lv)
        s = Sector(4, 2)
        psi = StateVector(s, rng.normal(size=s.dim))
        out = apply_operator(op, psi, lv)
        full = np.zeros(F.shape[0])
        off = sum(Sector(4, m).dim for m in range(2))
        full[off:off + s.dim] = psi.amplitudes.real
        got = F @ full
        o2 = sum(Sector(4, m).dim for m in range(out.sector.M))
        np.testing.assert_allclose(got[o2:o2 + out.sector.dim], out.amplitudes.real, atol=1e-14)


def test_annihilating_vacuum():
    lv = LevelSet.preset("paper4")
    out = apply_operator("B0", StateVector.vacuum(4), lv)
    assert out.is_zero


def test_run_config_roundtrip(paper8):
    c = Coupling.parse("1/2+1e-7")
    d = run_config_dict(paper8, Sector.from_holes(8, 3), c, holes=True)
    lv, s, c2 = parse_run_config(d)
    assert s == Sector(8, 5) and c2 == c
    np.testing.assert_array_equal(lv.z2, paper8.z2)


def test_spectrum_csv_header():
    text = spectrum_csv([1.0, 2.0])
    assert text.splitlines()[0] == "index,energy"
    assert text.splitlines()[1] == "0,1.000000000000"


def test_state_json_roundtrip(rng):
    s = Sector(5, 2)
    psi = StateVector(s, rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim))
    back = StateVector.from_json(psi.to_json(), 5)
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)
