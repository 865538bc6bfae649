"""BCS mean field for the pairing model.

The ``min`` branch (lowest state, G > 0) solves

    sum z**2 / E(z) = 1/G,    sum (z**2 - mu) / E(z) = L - 2M

with E(z) = sqrt((z**2 - mu)**2 + z**2 Delta**2).  The ``max`` branch
(highest state, G < 0) flips the signs of both right-hand sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import LevelSet, Sector, StateVector, _basis, _gval

GRID = 64


class MeanFieldSingularity(ZeroDivisionError):
    pass


@dataclass
class MeanFieldSolution:
    delta: float
    mu: float
    u: np.ndarray
    v: np.ndarray
    qp_energies: np.ndarray
    which: str
    G: float
    M: int
    residual: float
    found: bool = True

    def to_json(self, levels: LevelSet, overlap_with_exact=None) -> dict:
        E_min, E_max = mf_energies(self, levels, self.G, self.M)
        return {"G": self.G, "M": self.M, "delta": self.delta, "mu": self.mu,
                "E_min": E_min, "E_max": E_max, "overlap_with_exact": overlap_with_exact}


@dataclass
class NoSolution:
    G: float
    M: int
    which: str
    reason: str
    found: bool = False

    def to_json(self, levels=None, overlap_with_exact=None) -> dict:
        return {"G": self.G, "M": self.M, "which": self.which, "solution": None,
                "reason": self.reason}


def quasiparticle_energies(delta2, mu, levels: LevelSet) -> np.ndarray:
    z2 = levels.z2
    return np.sqrt((z2 - mu) ** 2 + z2 * delta2)


def _targets(G, M, L, which):
    if which == "min":
        return 1.0 / G, L - 2 * M
    if which == "max":
        return -1.0 / G, 2 * M - L
    raise ValueError(f"which must be 'min' or 'max', got {which!r}")


def gap_residual(delta2, mu, levels: LevelSet, G, M: int, which: str = "min"):
    """(r_gap, r_number) of the gap and chemical-potential equations."""
    if delta2 < 0:
        raise ValueError("Delta**2 must be non-negative")
    G = _gval(G)
    E = quasiparticle_energies(delta2, mu, levels)
    if np.any(E == 0):
        raise MeanFieldSingularity(f"E(z) vanishes at mu={mu}, Delta=0")
    tg, tn = _targets(G, M, levels.L, which)
    z2 = levels.z2
    return float(np.sum(z2 / E) - tg), float(np.sum((z2 - mu) / E) - tn)


def _jacobian(delta2, mu, z2):
    E = np.sqrt((z2 - mu) ** 2 + z2 * delta2)
    E3 = E ** 3
    # d/d(delta2) and d/d(mu) of both sums
    g_d = -0.5 * np.sum(z2 * z2 / E3)
    g_m = np.sum(z2 * (z2 - mu) / E3)
    n_d = -0.5 * np.sum((z2 - mu) * z2 / E3)
    n_m = np.sum(-1 / E + (z2 - mu) ** 2 / E3)
    return np.array([[g_d, g_m], [n_d, n_m]])


def _newton(d2, mu, levels, G, M, which, tol=1e-13, max_iter=60):
    z2 = levels.z2
    for _ in range(max_iter):
        r = np.array(gap_residual(d2, mu, levels, G, M, which))
        if np.max(np.abs(r)) <= tol * max(1.0, abs(1 / G), levels.L):
            return d2, mu
        step = np.linalg.solve(_jacobian(d2, mu, z2), -r)
        lam = 1.0
        while lam > 1e-6:
            nd2, nmu = d2 + lam * step[0], mu + lam * step[1]
            if nd2 > 0:
                try:
                    rn = np.array(gap_residual(nd2, nmu, levels, G, M, which))
                except MeanFieldSingularity:
                    rn = None
                if rn is not None and np.max(np.abs(rn)) < np.max(np.abs(r)):
                    break
            lam *= 0.5
        else:
            return None
        d2, mu = nd2, nmu
    return None


def _nested_bisection(levels, G, M, which, mu_lo, mu_hi):
    tg, _ = _targets(G, M, levels.L, which)
    z2 = levels.z2

    def delta2_of(mu):
        def f(d2):
            return np.sum(z2 / np.sqrt((z2 - mu) ** 2 + z2 * d2)) - tg
        hi = 1.0
        while f(hi) > 0:
            hi *= 4
            if hi > 1e12:
                return None
        if f(0.0) <= 0:
            return None
        return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-15)

    def number(mu):
        d2 = delta2_of(mu)
        if d2 is None:
            return math.nan
        return gap_residual(d2, mu, levels, G, M, which)[1]

    mus = np.linspace(mu_lo, mu_hi, 4 * GRID + 1)
    vals = [number(m) for m in mus]
    for a, b, fa, fb in zip(mus[:-1], mus[1:], vals[:-1], vals[1:]):
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb <= 0:
            mu = brentq(number, a, b, xtol=1e-15, rtol=1e-15)
            return delta2_of(mu), mu
    return None


def solve_gap_equations(levels: LevelSet, G, M: int, which: str = "min"):
    """Solve for (Delta, mu); returns a :class:`NoSolution` when none exists."""
    G = _gval(G)
    L = levels.L
    tg, _ = _targets(G, M, L, which)
    if tg <= 0:
        return NoSolution(G, M, which, "gap equation needs a positive sum of positive terms")
    if not 0 < M < L:
        return NoSolution(G, M, which, "empty or full block has no pairing gap")
    zmax = float(levels.z2.max())
    sol = None
    # widen the mu window when the solution lies outside the level band
    for span in (2 * zmax, 16 * zmax, 128 * zmax):
        sol = _grid_newton(levels, G, M, which, span)
        if sol is not None:
            break
    if sol is None:
        sol = _nested_bisection(levels, G, M, which, -128 * zmax, 128 * zmax)
        if sol is not None:
            sol = _newton(*sol, levels, G, M, which) or sol
    if sol is None:
        return NoSolution(G, M, which, "no sign change on the scan grid")
    d2, mu = sol
    return _assemble(d2, mu, levels, G, M, which)


def _grid_newton(levels, G, M, which, span):
    mu_grid = np.linspace(-span, span, GRID)
    d2_max = max((2 * abs(G) * levels.z.sum()) ** 2, 4 * span)
    d2_grid = np.linspace(0, d2_max, GRID + 1)[1:]
    rg = np.empty((GRID, GRID))
    rn = np.empty((GRID, GRID))
    for i, mu in enumerate(mu_grid):
        for j, d2 in enumerate(d2_grid):
            rg[i, j], rn[i, j] = gap_residual(d2, mu, levels, G, M, which)
    # cells where both residuals change sign, best first
    seeds = []
    for i in range(GRID - 1):
        for j in range(GRID - 1):
            g = rg[i:i + 2, j:j + 2]
            n = rn[i:i + 2, j:j + 2]
            if g.min() <= 0 <= g.max() and n.min() <= 0 <= n.max():
                seeds.append((abs(g).sum() + abs(n).sum(), d2_grid[j], mu_grid[i]))
    for _, d2, mu in sorted(seeds)[:8]:
        sol = _newton(d2, mu, levels, G, M, which)
        if sol is not None:
            return sol
    return None


def _assemble(d2, mu, levels, G, M, which):
    E = quasiparticle_energies(d2, mu, levels)
    x = (levels.z2 - mu) / E
    u = np.sqrt(0.5 * (1 + x))
    v = np.sqrt(0.5 * (1 - x))
    r = max(abs(t) for t in gap_residual(d2, mu, levels, G, M, which))
    return MeanFieldSolution(math.sqrt(d2), float(mu), u, v, E, which, G, M, r)


def mf_energies(sol: MeanFieldSolution, levels: LevelSet, G=None, M=None):
    """(E_min, E_max) of the mean-field Hamiltonian at the solved point."""
    G = sol.G if G is None else _gval(G)
    M = sol.M if M is None else M
    z2 = levels.z2
    base = 0.5 * np.sum(z2 - sol.mu) + sol.delta ** 2 / (4 * G) + sol.mu * M
    half = 0.5 * np.sum(sol.qp_energies)
    return float(base - half), float(base + half)


def projected_state(sol: MeanFieldSolution, M: int | None = None,
                    which: str | None = None) -> StateVector:
    """Fixed-M component: amplitude of c is M! prod_{l in c} (v_l/u_l) for
    ``min`` and M! prod (u_l/v_l) for ``max``."""
    M = sol.M if M is None else M
    which = sol.which if which is None else which
    num, den = (sol.v, sol.u) if which == "min" else (sol.u, sol.v)
    if np.any(den == 0):
        raise MeanFieldSingularity("vanishing amplitude in the projected state")
    ratio = num / den
    L = ratio.size
    sector = Sector(L, M)
    configs = np.array(_basis(L, M), dtype=int).reshape(sector.dim, M)
    amp = math.factorial(M) * np.prod(ratio[configs], axis=1)
    return StateVector(sector, amp)


def moore_read_coupling(L: int, M: int) -> float:
    """Coupling with 1/G = L - M, where the ground state has zero energy."""
    return 1.0 / (L - M)


def highest_state_coupling(M: int) -> float:
    """Coupling with 1/G = -M, where the highest state is mean-field exact."""
    return -1.0 / M
