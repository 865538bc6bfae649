import itertools
from math import factorial

import numpy as np
import pytest
from conftest import load_table

from pairsolve.bethe import Picture, enumerate_spectrum, newton_solve
from pairsolve.model import (CapacityError, Coupling, LevelSet, Sector, StateVector, create,
                             annihilate, build_hamiltonian, diagonalize_sector,
                             pair_coefficients, particle_hole_transform)
from pairsolve.states import (PoleError, build_bethe_state, eigen_residual, fidelity, overlap,
                              permanent, product_state, rootset_residual, subspace_fidelity)


def naive_permanent(A):
    n = A.shape[0]
    return sum(np.prod([A[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def test_permanent_small_cases():
    assert permanent([[3.0]]) == 3
    a, b, c, d = 2.0, 3.0, 5.0, 7.0
    assert permanent([[a, b], [c, d]]) == a * d + b * c
    assert permanent(np.ones((4, 4))) == factorial(4)


def test_permanent_matches_factorial_sum(rng):
    for n in range(1, 7):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ref = naive_permanent(A)
        assert abs(permanent(A) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_permanent_cap():
    with pytest.raises(CapacityError):
        permanent(np.ones((17, 17)))


def test_single_root_amplitudes(paper8):
    y = 0.7 + 0.2j
    psi = product_state(paper8, [y], Sector(8, 1), "particle")
    np.testing.assert_allclose(psi.amplitudes, paper8.z / (y - paper8.z2), rtol=1e-15)


def test_no_roots_gives_filled_state(paper8):
    psi = product_state(paper8, [], Sector(8, 8), "hole")
    np.testing.assert_array_equal(psi.amplitudes, [1.0])


def test_pole_error_names_level(paper8):
    with pytest.raises(PoleError, match="level 3"):
        product_state(paper8, [paper8.z2[2]], Sector(8, 1), "particle")


@pytest.mark.parametrize("L,K", [(4, 1), (5, 2), (6, 3)])
def test_permanent_expansion_matches_operator_products(L, K, rng):
    lv = LevelSet.preset(f"paper{L}")
    y = rng.normal(size=K) + 1j * rng.normal(size=K)
    vac = StateVector.vacuum(L)
    chi = StateVector.filled(L)
    for yj in y:
        vac = create(pair_coefficients(lv, yj), vac)
        chi = annihilate(pair_coefficients(lv, yj), chi)
    np.testing.assert_allclose(product_state(lv, y, Sector(L, K), "particle").amplitudes,
                               vac.amplitudes, rtol=1e-12)
    np.testing.assert_allclose(product_state(lv, y, Sector(L, L - K), "hole").amplitudes,
                               chi.amplitudes, rtol=1e-12)


def test_filled_state_residual_zero(paper8):
    assert eigen_residual(StateVector.filled(8), paper8, 0.37, energy=paper8.total) == 0


def test_solved_small_rootset_residual():
    lv = LevelSet.preset("paper4")
    for r in enumerate_spectrum(lv, 0.3, Sector.from_holes(4, 2), "hole"):
        assert rootset_residual(r) <= 1e-9


def test_random_roots_fail_residual(paper8, rng):
    y = rng.normal(size=3) + 2.0
    psi = product_state(paper8, y, Sector(8, 5), "hole")
    assert eigen_residual(psi, paper8, 0.3) > 1e-3


def test_zero_state_residual_error(paper8):
    with pytest.raises(ValueError):
        eigen_residual(StateVector.zero(Sector(8, 2)), paper8, 0.3)


def test_table1_row1_state(paper8):
    _, roots = load_table(1)
    rs = newton_solve(roots[0], "hole", paper8, Coupling.parse("1/2+1e-7"), Sector.from_holes(8, 3))
    psi = build_bethe_state(rs)
    assert eigen_residual(psi, paper8, rs.coupling, energy=rs.energy) <= 1e-6


def test_overlap_basics(paper8):
    chi = StateVector.filled(8)
    assert overlap(chi, chi) == 1
    _, V = diagonalize_sector(build_hamiltonian(paper8, 0.3, Sector(8, 3)))
    G = V.T @ V
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-12
    with pytest.raises(ValueError):
        overlap(chi, StateVector.vacuum(8))


def test_bethe_states_match_ed_vectors(levels6):
    s = Sector(6, 3)
    E, V = diagonalize_sector(build_hamiltonian(levels6, 0.37, s))
    for pic in Picture:
        for r in enumerate_spectrum(levels6, 0.37, s, pic):
            k = int(np.argmin(np.abs(E - r.energy)))
            psi = build_bethe_state(r)
            deg = np.abs(E - E[k]) <= 1e-8
            if deg.sum() == 1:
                assert fidelity(psi, StateVector(s, V[:, k])) == pytest.approx(1, abs=1e-8)
            else:
                assert subspace_fidelity(psi, V[:, deg]) == pytest.approx(1, abs=1e-8)


def test_picture_states_agree(levels6):
    s = Sector(6, 2)
    hole = sorted(enumerate_spectrum(levels6, 0.37, s, "hole"), key=lambda r: r.energy)
    part = sorted(enumerate_spectrum(levels6, 0.37, s, "particle"), key=lambda r: r.energy)
    for a, b in zip(hole, part):
        assert fidelity(build_bethe_state(a), build_bethe_state(b)) == pytest.approx(1, abs=1e-8)


def test_particle_hole_covariance(levels6):
    # roots solving H(G) in block M (particle) also solve H(-G) in block L-M (hole)
    G = 0.37
    for r in enumerate_spectrum(levels6, G, Sector(6, 2), "particle"):
        mapped = particle_hole_transform(build_bethe_state(r))
        other = product_state(levels6, r.y, Sector(6, 4), "hole")
        assert fidelity(mapped, other) == pytest.approx(1, abs=1e-10)
        assert eigen_residual(other, levels6, -G) <= 1e-9
