"""Self-check suites run by ``pairsolve verify``.

Each suite yields :class:`Check` records; a suite passes when all of its
checks do.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bethe import Picture, classify_roots, enumerate_spectrum
from .duality import (InapplicableDualityError, dimension_inequality_check, inversion_map,
                      sigma_identity_defect, verify_duality_pairing)
from .meanfield import (highest_state_coupling, moore_read_coupling, projected_state,
                        solve_gap_equations)
from .model import (Coupling, LevelSet, Sector, StateVector, build_hamiltonian,
                    diagonalize_sector, sector_spectrum)
from .states import fidelity

ORACLE_COUPLINGS = ("-0.37", "-0.15", "0.15", "0.37", "1/2+1e-7")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    tol: float

    def to_json(self) -> str:
        return json.dumps({"suite": self.suite, "check": self.name, "pass": bool(self.passed),
                           "value": float(self.value), "tol": self.tol})


def default_levels(L: int) -> LevelSet:
    """eps_j = j/10 for L <= 9, else evenly spaced in (0, 1)."""
    if L <= 9:
        return LevelSet.preset(f"paper{L}")
    return LevelSet.from_epsilon(np.arange(1, L + 1) / (L + 1))


def suite_oracle(L: int = 6, couplings=ORACLE_COUPLINGS, threads=None):
    levels = default_levels(L)
    for g in couplings:
        c = Coupling.parse(g)
        for M in range(L + 1):
            sector = Sector(L, M)
            ed = sector_spectrum(levels, c, sector)
            for pic in Picture:
                rs = enumerate_spectrum(levels, c, sector, pic, threads=threads)
                E = np.sort([r.energy for r in rs])
                dev = float(np.max(np.abs(E - ed)))
                yield Check("oracle", f"L={L} M={M} {pic.value} G={g}", dev <= 1e-8, dev, 1e-8)


def suite_reflection(L: int = 6, couplings=(0.15, 0.3, 0.37, 0.5, 1.2)):
    levels = default_levels(L)
    for g in couplings:
        for M in range(L + 1):
            a = sector_spectrum(levels, g, Sector(L, M))
            b = levels.total - sector_spectrum(levels, -g, Sector(L, L - M))[::-1]
            dev = float(np.max(np.abs(a - b)))
            yield Check("reflection", f"L={L} M={M} G={g}", dev <= 1e-10, dev, 1e-10)


def suite_duality(L: int = 6):
    levels = default_levels(L)
    for M in range(L + 1):
        for J in range(L + 1):
            K = L - 2 * M - J
            if K == 0:
                continue
            try:
                rep = verify_duality_pairing("zeropair", levels, Fraction(1, K), Sector(L, M))
            except InapplicableDualityError:
                continue
            yield Check("duality", f"zeropair L={L} M={M} J={J}", rep.max_residual <= 1e-10,
                        rep.max_residual, 1e-10)
    for K in range(1, L + 1):
        for Mp in range(K, L + 1):
            for rel in ("mixed", "combined"):
                try:
                    rep = verify_duality_pairing(rel, levels, Fraction(1, K), Sector(L, Mp))
                except InapplicableDualityError:
                    continue
                refl = max(abs(p.E_src + p.E_img - levels.total) for p in rep.pairs)
                worst = max(rep.max_residual, refl)
                yield Check("duality", f"{rel} L={L} 1/G={K} M'={Mp} rank={rep.gram_rank}",
                            worst <= 1e-8, worst, 1e-8)


def _table2_rootsets(offset=1e-7, threads=None):
    return enumerate_spectrum(LevelSet.preset("paper8"), Coupling.exact(Fraction(1, 2), offset),
                              Sector.from_holes(8, 6), Picture.HOLE, threads=threads)


def suite_collapse(threads=None):
    rs = _table2_rootsets(threads=threads)
    # -1/G + 2P - L zero roots and 1/G divergent roots at 1/G -> 2
    want_zero, want_inf = -2 + 12 - 8, 2
    bad = 0
    for r in rs:
        c = classify_roots(r)
        bad += (c.n_zero != want_zero) or (c.n_infinite != want_inf)
    yield Check("collapse", f"{len(rs)} root sets, zero={want_zero} inf={want_inf}", bad == 0,
                bad, 0)


def suite_sigma(n_states: int = 8, threads=None):
    deltas = (1e-5, 1e-7, 1e-9)
    runs = [sorted(_table2_rootsets(d, threads), key=lambda r: r.energy) for d in deltas]
    mono = 0
    for k in range(n_states):
        vals = [sigma_identity_defect(run[k], T=2) for run in runs]
        ok = vals[0] > vals[1] > vals[2]
        mono += ok
        yield Check("sigma", f"state {k} defects " + " ".join(f"{v:.2e}" for v in vals),
                    ok, vals[-1], 0)
    yield Check("sigma", "monotone states", mono >= 5, mono, 5)


def suite_meanfield(L: int = 8):
    levels = default_levels(L)
    M = L // 2
    sol = solve_gap_equations(levels, -0.3, M, "min")
    yield Check("meanfield", "no min solution for G<0", not sol.found, 0, 0)
    for M in range(1, L):
        G = moore_read_coupling(L, M)
        sol = solve_gap_equations(levels, G, M, "min")
        E, V = diagonalize_sector(build_hamiltonian(levels, G, Sector(L, M)))
        f = fidelity(projected_state(sol), StateVector(Sector(L, M), V[:, 0]))
        yield Check("meanfield", f"Moore-Read overlap M={M}", abs(1 - f) <= 1e-8, abs(1 - f), 1e-8)
        yield Check("meanfield", f"Moore-Read energy M={M}", abs(E[0]) <= 1e-10, abs(E[0]), 1e-10)
        dual = solve_gap_equations(levels, -G, L - M, "max")
        d = max(abs(dual.delta - sol.delta), abs(dual.mu - sol.mu))
        yield Check("meanfield", f"min/max duality M={M}", d <= 1e-10, d, 1e-10)
        Gh = highest_state_coupling(M)
        hi = solve_gap_equations(levels, Gh, M, "max")
        E, V = diagonalize_sector(build_hamiltonian(levels, Gh, Sector(L, M)))
        f = fidelity(projected_state(hi), StateVector(Sector(L, M), V[:, -1]))
        yield Check("meanfield", f"highest-state overlap M={M}", abs(1 - f) <= 1e-8,
                    abs(1 - f), 1e-8)


def suite_dimension(L_max: int = 30):
    rep = dimension_inequality_check(L_max)
    yield Check("appendixB", f"{rep.checked} triples up to L={L_max}", not rep.violations,
                len(rep.violations), 0)


def suite_inversion(couplings=(0.4, 0.15, -0.3)):
    levels = LevelSet.preset("inv4")
    L = levels.L
    for g, (pic, K) in itertools.product(couplings, [(p, k) for p in Picture for k in range(1, L)]):
        sector = Sector.from_holes(L, K) if pic is Picture.HOLE else Sector(L, K)
        rs = enumerate_spectrum(levels, g, sector, pic)
        try:
            img = [inversion_map(r) for r in rs]
        except ZeroDivisionError:
            continue
        res = max(r.residual for r in img)
        yield Check("inversion", f"residual {pic.value} K={K} G={g}", res <= 1e-10, res, 1e-10)
        E = np.sort([r.energy for r in img])
        dev = float(np.max(np.abs(E - sector_spectrum(levels, img[0].coupling, sector))))
        yield Check("inversion", f"spectrum {pic.value} K={K} G={g}", dev <= 1e-8, dev, 1e-8)


def suite_asymmetry(threads=None):
    rs = enumerate_spectrum(LevelSet.preset("paper8"), Coupling.exact(Fraction(1, 2), 1e-7),
                            Sector(8, 2), Picture.PARTICLE, threads=threads)
    n = sum(classify_roots(r).n_zero + classify_roots(r).n_infinite for r in rs)
    yield Check("asymmetry", "collapsed particle roots at L=8 M=2", n == 0, n, 0)


SUITES = {
    "oracle": suite_oracle,
    "reflection": suite_reflection,
    "duality": suite_duality,
    "collapse": suite_collapse,
    "sigma": suite_sigma,
    "meanfield": suite_meanfield,
    "appendixB": suite_dimension,
    "inversion": suite_inversion,
    "asymmetry": suite_asymmetry,
}
