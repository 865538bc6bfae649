from fractions import Fraction
from math import comb

import numpy as np
import pytest

from pairsolve.bethe import Picture, classify_roots, enumerate_spectrum
from pairsolve.duality import (DressingSpec, InapplicableDualityError, apply_dressing,
                               dimension_inequality_check, dual_sector, dressing_for,
                               inversion_map, inverted_coupling, sigma_identity_defect,
                               verify_duality_pairing)
from pairsolve.model import (Coupling, LevelSet, Sector, StateVector, build_hamiltonian,
                             diagonalize_sector, sector_spectrum)
from pairsolve.phase import classify, dual_point
from pairsolve.states import eigen_residual

HALF = Fraction(1, 2)


def test_dual_sectors():
    assert dual_sector("zeropair", Sector(8, 5), HALF) == Sector(8, 1)
    assert dual_sector("mixed", Sector(8, 5), HALF) == Sector(8, 7)
    assert dual_sector("combined", Sector(8, 2), HALF) == Sector(8, 6)
    with pytest.raises(InapplicableDualityError):
        dual_sector("zeropair", Sector(8, 2), 0.37)
    with pytest.raises(InapplicableDualityError):
        dual_sector("mixed", Sector(8, 7), HALF)


def test_identity_dressing(paper8, rng):
    s = Sector(8, 3)
    psi = StateVector(s, rng.normal(size=s.dim))
    out = apply_dressing(psi, DressingSpec(), paper8)
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_b0_annihilates_vacuum(paper8):
    assert apply_dressing(StateVector.vacuum(8), DressingSpec(J=1), paper8).is_zero


def test_combined_map_on_every_eigenstate(paper8):
    src = Sector(8, 6)
    E, V = diagonalize_sector(build_hamiltonian(paper8, -0.5, src))
    spec = DressingSpec(J=2, K=2)
    for e, v in zip(E, V.T):
        img = apply_dressing(StateVector(src, v), spec, paper8)
        assert img.sector == Sector(8, 2)
        assert eigen_residual(img, paper8, 0.5, energy=paper8.total - e) <= 1e-8


def test_mixed_injection_counts(paper8):
    rep = verify_duality_pairing("mixed", paper8, HALF, Sector.from_holes(8, 1))
    assert rep.target_sector == Sector.from_holes(8, 3)
    assert rep.gram_rank == 8
    assert rep.injective and not rep.surjective
    # exactly 8 of the 56 target eigenstates are reached
    assert rep.n_reached == 8
    assert rep.n_reached + (rep.target_sector.dim - rep.n_reached) == 56
    assert rep.target_weights.sum() == pytest.approx(8, abs=1e-8)
    for p in rep.pairs:
        assert p.E_src + p.E_img == pytest.approx(paper8.total, abs=1e-8)
        assert p.residual <= 1e-8


def test_combined_bijection(paper8):
    rep = verify_duality_pairing("combined", paper8, HALF, Sector.from_holes(8, 2))
    assert rep.target_sector == Sector.from_holes(8, 6)
    assert rep.gram_rank == 28 and rep.injective and rep.surjective
    d = rep.to_json()
    assert d["relation"] == "combined" and d["G"] == "1/2"
    assert d["source_sector"] == {"P": 2} and d["target_sector"] == {"P": 6}


def test_zero_pair_small():
    lv = LevelSet.preset("paper4")
    # 1/G = L - 2M - J with L=4, M=1, J=1
    rep = verify_duality_pairing("zeropair", lv, Fraction(1, 1), Sector(4, 1))
    assert rep.target_sector == Sector(4, 2)
    for p in rep.pairs:
        assert p.E_img == p.E_src
        assert p.residual <= 1e-10


def test_sector_bookkeeping(paper8):
    for rel, src, G in [("zeropair", Sector(8, 1), HALF), ("mixed", Sector(8, 7), HALF),
                        ("combined", Sector(8, 6), HALF)]:
        spec = dressing_for(rel, src, G)
        img = apply_dressing(StateVector.basis_state(src, range(src.M)), spec, paper8)
        target = src.shifted(spec.shift)
        assert img.sector == target
        if rel == "mixed":
            assert dual_sector(rel, target, G) == src
        else:
            assert dual_sector(rel, src, G) == target


def test_dimension_inequality():
    assert comb(8, 4) >= comb(8, 2)
    rep = dimension_inequality_check(30)
    assert rep.violations == [] and rep.checked > 1000
    with pytest.raises(ValueError):
        dimension_inequality_check(31)


def test_inversion_is_an_involution():
    lv = LevelSet.preset("inv4")
    s = Sector.from_holes(4, 2)
    for r in enumerate_spectrum(lv, 0.4, s, "hole"):
        back = inversion_map(inversion_map(r))
        assert back.coupling.value == pytest.approx(0.4, rel=1e-14)
        np.testing.assert_allclose(np.sort_complex(back.v), np.sort_complex(r.v), atol=1e-15)


def test_inversion_solves_mapped_equations():
    lv = LevelSet.preset("inv4")
    s = Sector.from_holes(4, 2)
    assert inverted_coupling(0.4, "hole", s).value == pytest.approx(-0.4)
    images = [inversion_map(r) for r in enumerate_spectrum(lv, 0.4, s, "hole")]
    assert max(r.residual for r in images) <= 1e-10
    E = np.sort([r.energy for r in images])
    np.testing.assert_allclose(E, sector_spectrum(lv, -0.4, s), atol=1e-8)


def test_inversion_needs_closed_levels(paper8):
    r = enumerate_spectrum(LevelSet.preset("paper2"), 0.3, Sector(2, 1), "hole")[0]
    with pytest.raises(ValueError):
        inversion_map(r)


def test_inversion_stable_regions():
    for gi, x in [(0.1, 0.2), (-0.3, 0.8)]:
        r = classify(gi, x)
        assert r in ("V", "III")
        assert classify(*dual_point("inversion", gi, x)) == r


def test_collapse_counts_table2(paper8):
    rs = enumerate_spectrum(paper8, Coupling.parse("1/2+1e-7"), Sector.from_holes(8, 6), "hole")
    for r in rs:
        c = classify_roots(r)
        assert c.n_zero == -2 + 2 * 6 - 8
        assert c.n_infinite == 2


def _reduced_residual(rs, keep, S):
    """Relative residual of the S-root hole equations for the kept roots."""
    G = rs.coupling.value
    L = rs.sector.L
    y = rs.y[keep]
    z2 = rs.levels.z2
    out = []
    for m, ym in enumerate(y):
        terms = [-1 / G + 2 * S - L - 1]
        terms += list(ym / (ym - z2))
        terms += [-2 * ym / (ym - yj) for j, yj in enumerate(y) if j != m]
        out.append(abs(sum(terms)) / sum(abs(t) for t in terms))
    return max(out)


def test_root_augmentation(paper8):
    # P = 6 sets near 1/G = 2 are S = 4 solutions plus T = -1/G + 2P - L = 2 zero roots
    prev = None
    for d in (1e-7, 1e-9):
        c = Coupling.exact(HALF, d)
        small = sector_spectrum(paper8, c, Sector.from_holes(8, 4))
        worst = 0.0
        for r in enumerate_spectrum(paper8, c, Sector.from_holes(8, 6), "hole"):
            cls = classify_roots(r)
            assert cls.n_zero == 2
            worst = max(worst, _reduced_residual(r, ~cls.zero_mask, 4))
            # the zero roots carry no energy
            assert np.min(np.abs(small - r.energy)) <= 1e-4
        assert worst <= 1e-4
        if prev is not None:
            assert worst < prev
        prev = worst


def test_sigma_identity_tightens(paper8):
    vals = []
    for d in (1e-5, 1e-7, 1e-9):
        rs = enumerate_spectrum(paper8, Coupling.exact(HALF, d), Sector.from_holes(8, 6), "hole")
        low = min(rs, key=lambda r: r.energy)
        vals.append(sigma_identity_defect(low, T=2))
    assert vals[1] <= 1e-4
    assert vals[0] > vals[1] > vals[2]
