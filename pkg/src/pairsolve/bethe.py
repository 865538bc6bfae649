"""Bethe Ansatz root systems of the pairing model, in Moebius variables.

Two equivalent root systems describe every eigenstate of a block:

* particle picture: M roots acting on the vacuum, energy (1 + G) sum(y)
* hole picture: P = L - M roots acting on the filled state, energy
  sum(z**2) + (G - 1) sum(y)

Both are solved in v = (y - 1) / (y + 1), where y = 0 and y = infinity
become the finite points v = -1 and v = +1.  Roots near those points are
stored as an anchor in {-1, 0, +1} plus a small complex offset so that
their distance to the collapse point keeps full relative precision.

Newton iterations use the equations multiplied through by (1 - v_n**2),
which keeps every term O(1) when roots pile up at v = +/-1.  The raw
(unmultiplied) residual is exposed as :func:`bae_residual`.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import Coupling, LevelSet, Sector, StateVector, _gval

DEFAULT_TOL = 1e-12
DEFAULT_OFFSET = 1e-7
G_START = 1e-6
# distance below which a root is expressed relative to v = +/-1
_ANCHOR_RADIUS = 0.1
# tracking tolerance between accepted continuation steps
_TRACK_TOL = 1e-9
_DETOURS = (1.0, -1.0, 0.6, -0.6, 1.8, -1.8)


class PoleError(ZeroDivisionError):
    pass


class SingularConfigurationError(ValueError):
    """Two roots coincide, or a root sits on a level."""


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class DivergenceError(NonConvergenceError):
    pass


class ContinuationStuckError(RuntimeError):
    def __init__(self, msg, t=None, coupling=None, roots_v=None):
        super().__init__(msg)
        self.t = t
        self.coupling = coupling
        self.roots_v = roots_v


class PartialSpectrumError(RuntimeError):
    def __init__(self, msg, failed_seeds, rootsets):
        super().__init__(msg)
        self.failed_seeds = failed_seeds
        self.rootsets = rootsets


class ConjugationError(ValueError):
    pass


class Picture(str, Enum):
    PARTICLE = "particle"
    HOLE = "hole"

    @property
    def sign(self) -> int:
        # sign in front of 1/G in the constant term of the equations
        return 1 if self is Picture.PARTICLE else -1

    def root_count(self, sector: Sector) -> int:
        return sector.M if self is Picture.PARTICLE else sector.P


# ---------------------------------------------------------------------------
# change of variables


def moebius(y):
    """v = (y - 1) / (y + 1)."""
    y = np.asarray(y, dtype=complex)
    if np.any(y == -1):
        raise PoleError("y = -1 maps to v = infinity")
    v = (y - 1) / (y + 1)
    return v if v.ndim else complex(v)


def moebius_inverse(v):
    """y = (1 + v) / (1 - v)."""
    v = np.asarray(v, dtype=complex)
    if np.any(v == 1):
        raise PoleError("v = 1 is y = infinity")
    y = (1 + v) / (1 - v)
    return y if y.ndim else complex(y)


def _anchor(v):
    v = np.asarray(v, dtype=complex)
    a = np.where(np.abs(v - 1) < _ANCHOR_RADIUS, 1.0,
                 np.where(np.abs(v + 1) < _ANCHOR_RADIUS, -1.0, 0.0))
    return a, v - a


def _reanchor(a, o):
    v = a + o
    na = np.where(np.abs(v - 1) < _ANCHOR_RADIUS, 1.0,
                  np.where(np.abs(v + 1) < _ANCHOR_RADIUS, -1.0, 0.0))
    return na, (a - na) + o


def _y_from(a, o):
    num = (1 + a) + o
    den = (1 - a) - o
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def _inv_y_minus_z2(a, o, eps):
    """1 / (y_k - z_l**2) as a (K, L) array, finite at v = 1."""
    v = a + o
    return (((1 - a) - o)[:, None] * (1 - eps)[None, :]) / (2 * (v[:, None] - eps[None, :]))


# ---------------------------------------------------------------------------
# root sets


@dataclass(frozen=True, eq=False)
class RootSet:
    picture: Picture
    levels: LevelSet
    sector: Sector
    coupling: Coupling
    anchor: np.ndarray
    offset: np.ndarray
    residual: float
    seed: tuple = ()
    # distance between the root multiset and its conjugate before symmetrizing
    conjugation_defect: float = 0.0

    @property
    def v(self) -> np.ndarray:
        return self.anchor + self.offset

    @property
    def y(self) -> np.ndarray:
        return _y_from(self.anchor, self.offset)

    @property
    def n_roots(self) -> int:
        return self.offset.size

    @property
    def energy(self) -> float:
        return energy_from_roots(self)

    def sorted_v(self) -> np.ndarray:
        v = self.v
        return v[np.lexsort((v.imag, v.real))]

    def with_roots(self, v, **kw) -> "RootSet":
        a, o = _anchor(v)
        fields = dict(picture=self.picture, levels=self.levels, sector=self.sector,
                      coupling=self.coupling, anchor=a, offset=o,
                      residual=self.residual, seed=self.seed)
        fields.update(kw)
        return RootSet(**fields)


def _make_rootset(picture, levels, sector, coupling, a, o, residual, seed=(), defect=0.0):
    return RootSet(Picture(picture), levels, sector, Coupling.coerce(coupling),
                   np.asarray(a, dtype=float), np.asarray(o, dtype=complex),
                   float(residual), tuple(seed), float(defect))


# ---------------------------------------------------------------------------
# equations


def _constants(picture: Picture, L: int, K: int, G):
    c = picture.sign / G + 2 * K - L - 1
    return 2 * c, L - 2 * K + 2


def _system(a, o, eps, two_c, A):
    """Multiplied-through equations, their Jacobian, and term scales."""
    n = o.size
    v = a + o
    om = (1 - a) - o
    op = (1 + a) + o
    dv = (a[:, None] - a[None, :]) + (o[:, None] - o[None, :])
    np.fill_diagonal(dv, 1.0)
    inv_q = 2 / dv
    np.fill_diagonal(inv_q, 0.0)
    de = v[:, None] - eps[None, :]
    inv_e = 1 / de
    S = inv_e.sum(1) - inv_q.sum(1)
    w = om * op
    F = two_c + A * op + w * S
    scale = abs(two_c) + np.abs(A * op) + np.abs(w) * (np.abs(inv_e).sum(1) + np.abs(inv_q).sum(1))
    inv_q2 = inv_q / dv
    J = -w[:, None] * inv_q2
    J[np.diag_indices(n)] = A - 2 * v * S + w * (inv_q2.sum(1) - (inv_e * inv_e).sum(1))
    return F, J, scale


def _rel_residual(F, scale) -> float:
    return float(np.max(np.abs(F) / np.maximum(scale, 1e-300))) if F.size else 0.0


def _check_configuration(v, eps, tol=1e-14):
    v = np.asarray(v, dtype=complex)
    for i, j in itertools.combinations(range(v.size), 2):
        if abs(v[i] - v[j]) <= tol:
            raise SingularConfigurationError(f"roots {i} and {j} coincide at v={v[i]:.6g}")
    for i, vi in enumerate(v):
        l = np.flatnonzero(np.abs(vi - eps) <= tol)
        if l.size:
            raise SingularConfigurationError(f"root {i} sits on level {l[0]}")
        if abs(vi - 1) <= tol or abs(vi + 1) <= tol:
            raise SingularConfigurationError(f"root {i} sits on the pole v={vi.real:+.0f}")


def bae_residual(roots_v, picture, levels: LevelSet, G, sector: Sector) -> np.ndarray:
    """Residual of the Bethe equations in v-space.

    Component n (hole picture, P roots) is
    (-2/G + 4P - 2L - 2) / (1 - v_n**2) + (L - 2P + 2) / (1 - v_n)
    + sum_l 1/(v_n - eps_l) - sum_{q != n} 2/(v_n - v_q).
    The particle picture has +2/G and M in place of P.
    """
    picture = Picture(picture)
    v = np.asarray(roots_v, dtype=complex)
    K = picture.root_count(sector)
    if v.size != K:
        raise ValueError(f"expected {K} roots, got {v.size}")
    eps = levels.epsilon
    _check_configuration(v, eps)
    two_c, A = _constants(picture, sector.L, K, _gval(G))
    dv = v[:, None] - v[None, :]
    np.fill_diagonal(dv, 1.0)
    inv_q = 2 / dv
    np.fill_diagonal(inv_q, 0.0)
    return (two_c / (1 - v * v) + A / (1 - v) + (1 / (v[:, None] - eps[None, :])).sum(1)
            - inv_q.sum(1))


def bae_jacobian(roots_v, picture, levels: LevelSet, G, sector: Sector) -> np.ndarray:
    """Analytic derivative of :func:`bae_residual` with respect to the roots."""
    picture = Picture(picture)
    v = np.asarray(roots_v, dtype=complex)
    K = picture.root_count(sector)
    if v.size != K:
        raise ValueError(f"expected {K} roots, got {v.size}")
    eps = levels.epsilon
    _check_configuration(v, eps)
    two_c, A = _constants(picture, sector.L, K, _gval(G))
    dv = v[:, None] - v[None, :]
    np.fill_diagonal(dv, 1.0)
    inv_q2 = 2 / dv ** 2
    np.fill_diagonal(inv_q2, 0.0)
    J = -inv_q2
    diag = (two_c * 2 * v / (1 - v * v) ** 2 + A / (1 - v) ** 2
            - (1 / (v[:, None] - eps[None, :]) ** 2).sum(1) + inv_q2.sum(1))
    J[np.diag_indices(K)] = diag
    return J


def condition_number(roots_v, picture, levels, G, sector) -> float:
    return float(np.linalg.cond(bae_jacobian(roots_v, picture, levels, G, sector)))


def scaled_residual(rs: RootSet) -> float:
    """Relative residual of the multiplied-through equations."""
    K = rs.n_roots
    if K == 0:
        return 0.0
    two_c, A = _constants(rs.picture, rs.sector.L, K, rs.coupling.value)
    F, _, scale = _system(rs.anchor, rs.offset, rs.levels.epsilon, two_c, A)
    return _rel_residual(F, scale)


# ---------------------------------------------------------------------------
# Newton


def _newton_track(a, o, eps, two_c, A, tol, max_iter, max_first=None):
    """Plain Newton used inside continuation.  Returns None on any sign of
    trouble so the caller can shrink the step."""
    prev = None
    for it in range(max_iter + 1):
        F, J, scale = _system(a, o, eps, two_c, A)
        r = _rel_residual(F, scale)
        if r <= tol:
            return a, o, r, it
        if it == max_iter:
            return None
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        nd = float(np.max(np.abs(d)))
        if not math.isfinite(nd):
            return None
        if it == 0 and max_first is not None and np.any(np.abs(d) > max_first):
            return None
        if prev is not None and nd > 0.5 * prev and nd > 1e-12 * float(np.max(np.abs(a + o))):
            return None
        prev = nd
        a, o = _reanchor(a, o + d)
        if nd <= 4e-16 * float(np.max(np.abs(a + o))):
            F, _, scale = _system(a, o, eps, two_c, A)
            return a, o, _rel_residual(F, scale), it + 1
    return None


def _polish(a, o, eps, two_c, A, n_iter=6):
    """A few undamped Newton steps, keeping the best iterate."""
    F, J, scale = _system(a, o, eps, two_c, A)
    best = (a, o, _rel_residual(F, scale))
    for _ in range(n_iter):
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        a, o = _reanchor(a, o + d)
        F, J, scale = _system(a, o, eps, two_c, A)
        r = _rel_residual(F, scale)
        if not math.isfinite(r):
            break
        if r < best[2]:
            best = (a, o, r)
        elif r > 10 * best[2]:
            break
    return best


def _symmetrize(a, o):
    """Replace the root multiset by the average with its conjugate.

    Returns the new (anchor, offset) and the pairing distance before
    averaging."""
    n = o.size
    if n == 0:
        return a, o, 0.0
    v = a + o
    cost = np.abs(v[:, None] - np.conj(v)[None, :])
    rows, cols = linear_sum_assignment(cost)
    defect = float(cost[rows, cols].max())
    a2, o2 = a.copy(), o.copy()
    for i, j in zip(rows, cols):
        if a[i] == a[j]:
            o2[i] = 0.5 * (o[i] + np.conj(o[j]))
        else:
            vi = 0.5 * (v[i] + np.conj(v[j]))
            o2[i] = vi - a[i]
    return a2, o2, defect


def newton_solve(initial_v, picture, levels: LevelSet, G, sector: Sector,
                 tol: float = DEFAULT_TOL, max_iter: int = 50, seed=()) -> RootSet:
    """Damped Newton on the Bethe equations from an initial guess.

    Steps are halved (at most five times) while the residual does not
    decrease.  Roots that approach each other closer than 1e-10 are split
    into a conjugate pair and the iteration restarts.
    """
    picture = Picture(picture)
    coupling = Coupling.coerce(G)
    K = picture.root_count(sector)
    v0 = np.asarray(initial_v, dtype=complex)
    if v0.size != K:
        raise ValueError(f"expected {K} initial roots, got {v0.size}")
    eps = levels.epsilon
    _check_configuration(v0, eps)
    if K == 0:
        return _make_rootset(picture, levels, sector, coupling, [], [], 0.0, seed)
    two_c, A = _constants(picture, sector.L, K, coupling.value)
    a, o = _anchor(v0)
    F, J, scale = _system(a, o, eps, two_c, A)
    r = _rel_residual(F, scale)
    nudged = 0
    for it in range(max_iter):
        if r <= tol:
            break
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = 1.0
        for _ in range(6):
            ta, to = _reanchor(a, o + lam * d)
            Ft, Jt, st = _system(ta, to, eps, two_c, A)
            rt = _rel_residual(Ft, st)
            if math.isfinite(rt) and rt < r:
                break
            lam *= 0.5
        else:
            raise DivergenceError(f"residual stopped decreasing at {r:.3e}", residual=r)
        a, o, F, J, r = ta, to, Ft, Jt, rt
        v = a + o
        close = [(i, j) for i, j in itertools.combinations(range(K), 2) if abs(v[i] - v[j]) < 1e-10]
        if close and nudged < 3:
            i, j = close[0]
            v = v.copy()
            v[i] += 1e-8j
            v[j] -= 1e-8j
            a, o = _anchor(v)
            F, J, scale = _system(a, o, eps, two_c, A)
            r = _rel_residual(F, scale)
            nudged += 1
    a, o, r = _polish(a, o, eps, two_c, A, n_iter=3)
    if r > tol:
        raise NonConvergenceError(f"no convergence after {max_iter} iterations (residual {r:.3e})",
                                  residual=r)
    return _finish(picture, levels, sector, coupling, a, o, seed, tol)


def _finish(picture, levels, sector, coupling, a, o, seed, tol):
    eps = levels.epsilon
    K = o.size
    two_c, A = _constants(picture, sector.L, K, coupling.value)
    a, o, defect = _symmetrize(a, o)
    F, _, scale = _system(a, o, eps, two_c, A)
    r = _rel_residual(F, scale)
    if r > tol:
        a, o, r = _polish(a, o, eps, two_c, A, n_iter=4)
        a, o, _ = _symmetrize(a, o)
        F, _, scale = _system(a, o, eps, two_c, A)
        r = _rel_residual(F, scale)
    return _make_rootset(picture, levels, sector, coupling, a, o, r, seed, defect)


# ---------------------------------------------------------------------------
# continuation from the free limit


def _free_limit_roots(levels: LevelSet, seed, picture: Picture, G0: float):
    z2 = levels.z2[list(seed)]
    # first order in G: y = z**2 (1 - sign * G)
    y = z2 * (1 - picture.sign * G0)
    return (y - 1) / (y + 1)


def continuation_solve(seed, picture, levels: LevelSet, G_target, sector: Sector,
                       tol: float = DEFAULT_TOL, detour: float = 1.0,
                       G_start: float = G_START) -> RootSet:
    """Follow the roots seeded on the levels in ``seed`` from |G| = G_start
    to ``G_target``.

    The coupling runs along G(t) = G0 + (G1 - G0) (t + i*detour*t*(1 - t)),
    an arc through the complex plane that only touches the real axis at
    its ends.  Root collisions and collapses onto v = +/-1 happen at real
    couplings, so the arc steps around them.  Steps use an Euler predictor
    and a Newton corrector; a step is rejected (and halved) when the first
    correction exceeds a fraction of the smallest root separation or when
    Newton stops contracting.
    """
    picture = Picture(picture)
    coupling = Coupling.coerce(G_target)
    sector.check()
    seed = tuple(sorted(int(s) for s in seed))
    K = picture.root_count(sector)
    if len(seed) != K or len(set(seed)) != K or any(not 0 <= s < sector.L for s in seed):
        raise ValueError(f"seed must be {K} distinct levels in [0, {sector.L})")
    if K == 0:
        return _make_rootset(picture, levels, sector, coupling, [], [], 0.0, seed)
    g1 = coupling.value
    if g1 == 0:
        raise ValueError("continuation needs a non-zero target coupling")
    g0 = math.copysign(G_start, g1)
    eps = levels.epsilon
    L = sector.L

    a, o = _anchor(_free_limit_roots(levels, seed, picture, g0))
    two_c, A = _constants(picture, L, K, g0)
    start = _newton_track(a, o, eps, two_c, A, tol=1e-13, max_iter=20)
    if start is None:
        raise ContinuationStuckError("could not polish the free-limit roots", t=0.0,
                                     coupling=g0, roots_v=a + o)
    a, o = start[0], start[1]
    if g1 == g0:
        return _finish(picture, levels, sector, coupling, a, o, seed, tol)

    span = g1 - g0

    def path(t):
        return g0 + span * (t + 1j * detour * t * (1 - t))

    def dpath(t):
        return span * (1 + 1j * detour * (1 - 2 * t))

    t = 0.0
    h = 0.01
    easy = 0
    h_floor = 1e-12 / abs(span)
    while t < 1.0:
        h = min(h, 1.0 - t)
        G = path(t)
        two_c, A = _constants(picture, L, K, G)
        F, J, _ = _system(a, o, eps, two_c, A)
        # d(2c)/dG = -2 sign / G**2
        dF = np.full(K, -2 * picture.sign / G ** 2, dtype=complex)
        try:
            tangent = np.linalg.solve(J, -dF * dpath(t))
        except np.linalg.LinAlgError:
            raise ContinuationStuckError("singular Jacobian on the path", t=t, coupling=G,
                                         roots_v=a + o)
        # per-root distance to the nearest level, pole or other root
        v = a + o
        sep = np.minimum(np.minimum(np.abs((1 - a) - o), np.abs((1 + a) + o)),
                         np.min(np.abs(v[:, None] - eps[None, :]), axis=1))
        if K > 1:
            dv = np.abs((a[:, None] - a[None, :]) + (o[:, None] - o[None, :]))
            np.fill_diagonal(dv, np.inf)
            sep = np.minimum(sep, dv.min(axis=1))
        t_new = 1.0 if t + h >= 1.0 else t + h
        G_new = path(t_new) if t_new < 1.0 else complex(g1)
        two_c, A = _constants(picture, L, K, G_new)
        pa, po = _reanchor(a, o + h * tangent)
        out = _newton_track(pa, po, eps, two_c, A, tol=_TRACK_TOL, max_iter=6,
                            max_first=0.3 * sep)
        if out is None:
            h *= 0.5
            easy = 0
            if h < h_floor:
                raise ContinuationStuckError(f"step underflow at t={t:.6g}", t=t, coupling=G,
                                             roots_v=a + o)
            continue
        a, o, _, its = out
        t = t_new
        if its <= 2:
            easy += 1
            if easy >= 2:
                h *= 2
                easy = 0
        else:
            easy = 0

    two_c, A = _constants(picture, L, K, g1)
    a, o, r = _polish(a, o, eps, two_c, A)
    if r > tol:
        raise NonConvergenceError(f"final polish stalled at residual {r:.3e}", residual=r)
    return _finish(picture, levels, sector, coupling, a, o, seed, tol)


def _multiset_distance(u, w) -> float:
    if u.size == 0:
        return 0.0
    cost = np.abs(u[:, None] - w[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def _same_solution(p: RootSet, q: RootSet) -> bool:
    return _multiset_distance(p.v, q.v) <= 1e-8 * (1 + float(np.max(np.abs(p.v))))


def _solve_seed(args):
    seed, picture, levels, coupling, sector, tol, detour = args
    try:
        return continuation_solve(seed, picture, levels, coupling, sector, tol=tol, detour=detour)
    except (ContinuationStuckError, NonConvergenceError, np.linalg.LinAlgError) as exc:
        return exc


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("PAIRSOLVE_THREADS", "1") or 1)
    return max(1, int(threads))


def enumerate_spectrum(levels: LevelSet, G, sector: Sector, picture,
                       tol: float = DEFAULT_TOL, threads: int | None = None) -> list[RootSet]:
    """Solve from every seed configuration; one root set per eigenstate.

    Results come back in seed order.  Seeds whose paths fail, or land on a
    solution another seed already reached, are retried along different
    complex detours before giving up.
    """
    picture = Picture(picture)
    coupling = Coupling.coerce(G)
    sector.check()
    K = picture.root_count(sector)
    seeds = list(itertools.combinations(range(sector.L), K))
    n_workers = _threads(threads)

    def run(batch, detour):
        jobs = [(s, picture, levels, coupling, sector, tol, detour) for s in batch]
        if n_workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(n_workers) as pool:
                return list(pool.map(_solve_seed, jobs))
        return [_solve_seed(j) for j in jobs]

    results = dict(zip(seeds, run(seeds, _DETOURS[0])))
    for detour in _DETOURS[1:]:
        bad = _suspect_seeds(results)
        if not bad:
            break
        for s, r in zip(bad, run(bad, detour)):
            results[s] = r
    bad = _suspect_seeds(results)
    if bad:
        good = [results[s] for s in seeds if isinstance(results[s], RootSet)]
        raise PartialSpectrumError(
            f"{len(bad)} of {len(seeds)} seeds failed or duplicated: "
            + ", ".join(str([l + 1 for l in s]) for s in bad), bad, good)
    return [results[s] for s in seeds]


def _suspect_seeds(results: dict) -> list:
    bad = [s for s, r in results.items() if not isinstance(r, RootSet)]
    ok = [(s, r) for s, r in results.items() if isinstance(r, RootSet)]
    ok.sort(key=lambda sr: sr[1].energy)
    dup = set()
    for i in range(len(ok)):
        for j in range(i + 1, len(ok)):
            if ok[j][1].energy - ok[i][1].energy > 1e-6 * (1 + abs(ok[i][1].energy)):
                break
            if _same_solution(ok[i][1], ok[j][1]):
                dup.add(ok[i][0])
                dup.add(ok[j][0])
    return sorted(set(bad) | dup)


# ---------------------------------------------------------------------------
# energies and classification


def energy_from_roots(rs: RootSet, method: str = "sumrule") -> float:
    """Energy of the eigenstate labelled by a solved root set.

    ``method="direct"`` evaluates (1 + G) sum(y) or sum(z**2) + (G - 1) sum(y)
    as written.  The default ``"sumrule"`` uses the identity obtained by
    multiplying each equation by y_k**2 and summing,

        hole:      E = sum(z**2) (1 - G P) - G sum_{k,l} z_l**4 / (y_k - z_l**2)
        particle:  E = -G [M sum(z**2) + sum_{k,l} z_l**4 / (y_k - z_l**2)]

    which agrees with the direct form on solutions but stays accurate when
    pairs of roots run off to y = +/-infinity.
    """
    G = rs.coupling.value
    z2 = rs.levels.z2
    if method == "direct":
        s = rs.y.sum()
        E = (1 + G) * s if rs.picture is Picture.PARTICLE else rs.levels.total + (G - 1) * s
    elif method == "sumrule":
        inner = (_inv_y_minus_z2(rs.anchor, rs.offset, rs.levels.epsilon) * (z2 * z2)[None, :]).sum()
        if rs.picture is Picture.PARTICLE:
            E = -G * (rs.n_roots * rs.levels.total + inner)
        else:
            E = rs.levels.total * (1 - G * rs.n_roots) - G * inner
    else:
        raise ValueError(f"unknown method {method!r}")
    E = complex(E)
    if abs(E.imag) > 1e-10 * max(1.0, abs(E.real)):
        raise ConjugationError(f"energy has imaginary part {E.imag:.3e}")
    return E.real


@dataclass
class RootClassification:
    n_regular: int
    n_zero: int
    n_infinite: int
    # sum of y over the roots near v = 1 and over the remaining roots
    sigma_estimate: complex
    regular_sum: complex
    zero_mask: np.ndarray = field(repr=False)
    infinite_mask: np.ndarray = field(repr=False)
    warnings: list = field(default_factory=list)


def classify_roots(rs: RootSet, tau_zero: float = 1e-2, tau_inf: float = 1e-2,
                   refine: bool = False) -> RootClassification:
    """Split roots into zero (|v + 1| < tau_zero), infinite (|v - 1| < tau_inf)
    and regular groups.

    With ``refine=True`` the roots are first re-polished in extended
    precision, which the cluster sum sigma needs when the offset from the
    critical coupling is tiny.
    """
    if refine:
        rs = refine_roots(rs)
    v = rs.v
    dz = np.abs(v + 1)
    di = np.abs(v - 1)
    zero = dz < tau_zero
    inf = di < tau_inf
    warnings = []
    for k in np.flatnonzero(~zero & (dz < 3 * tau_zero)):
        warnings.append(f"root {k} at v={v[k]:.6g} is near the zero threshold")
    for k in np.flatnonzero(~inf & (di < 3 * tau_inf)):
        warnings.append(f"root {k} at v={v[k]:.6g} is near the infinity threshold")
    y = rs.y
    sigma = complex(y[inf].sum())
    rest = complex(y[~inf].sum())
    return RootClassification(int((~zero & ~inf).sum()), int(zero.sum()), int(inf.sum()),
                              sigma, rest, zero, inf, warnings)


def refine_roots(rs: RootSet, dps: int = 40, iterations: int = 6) -> RootSet:
    """Newton-polish the offsets in mpmath at ``dps`` digits."""
    import mpmath

    K = rs.n_roots
    if K == 0:
        return rs
    with mpmath.workdps(dps):
        t = rs.coupling.target
        if t is not None:
            G = mpmath.mpf(t.numerator) / t.denominator + mpmath.mpf(rs.coupling.offset)
        else:
            G = mpmath.mpf(rs.coupling.value)
        L = rs.sector.L
        c2 = 2 * (rs.picture.sign / G + 2 * K - L - 1)
        A = L - 2 * K + 2
        eps = [mpmath.mpf(e) for e in rs.levels.epsilon]
        a = [int(x) for x in rs.anchor]
        o = [mpmath.mpc(x.real, x.imag) for x in rs.offset]

        def system(o):
            F = mpmath.matrix(K, 1)
            J = mpmath.matrix(K, K)
            for n in range(K):
                vn = a[n] + o[n]
                w = ((1 - a[n]) - o[n]) * ((1 + a[n]) + o[n])
                Se = sum(1 / (vn - e) for e in eps)
                Se2 = sum(1 / (vn - e) ** 2 for e in eps)
                Sq = mpmath.mpf(0)
                Sq2 = mpmath.mpf(0)
                for q in range(K):
                    if q == n:
                        continue
                    d = (a[n] - a[q]) + (o[n] - o[q])
                    Sq += 2 / d
                    Sq2 += 2 / d ** 2
                    J[n, q] = -w * 2 / d ** 2
                S = Se - Sq
                F[n] = c2 + A * ((1 + a[n]) + o[n]) + w * S
                J[n, n] = A - 2 * vn * S + w * (Sq2 - Se2)
            return F, J

        for _ in range(iterations):
            F, J = system(o)
            d = mpmath.lu_solve(J, -F)
            o = [o[k] + d[k] for k in range(K)]
        off = np.array([complex(x) for x in o])
    return RootSet(rs.picture, rs.levels, rs.sector, rs.coupling, rs.anchor.copy(), off,
                   rs.residual, rs.seed, rs.conjugation_defect)


# ---------------------------------------------------------------------------
# serialization


def rootset_to_json(rs: RootSet, tau: float = 1e-2) -> dict:
    cls = classify_roots(rs, tau, tau)
    d = {"picture": rs.picture.value, "L": rs.sector.L}
    if rs.picture is Picture.HOLE:
        d["P"] = rs.sector.P
    else:
        d["M"] = rs.sector.M
    d["G"] = rs.coupling.to_dict()
    d["levels"] = rs.levels.to_dict()
    d["seed"] = [s + 1 for s in rs.seed]
    v = rs.sorted_v()
    a, o = _anchor(v)
    y = _y_from(a, o)
    d["v"] = [[float(x.real), float(x.imag)] for x in v]
    d["y"] = [[float(x.real), float(x.imag)] for x in y]
    d["energy"] = energy_from_roots(rs)
    d["residual"] = rs.residual
    d["class"] = {"zero": cls.n_zero, "inf": cls.n_infinite}
    return d


def rootset_from_json(d: dict, levels: LevelSet | None = None) -> RootSet:
    if levels is None:
        levels = LevelSet.from_dict(d["levels"])
    L = int(d["L"])
    sector = Sector.from_holes(L, int(d["P"])) if "P" in d else Sector(L, int(d["M"]))
    v = np.array([complex(re, im) for re, im in d["v"]])
    a, o = _anchor(v)
    return _make_rootset(d["picture"], levels, sector, Coupling.from_dict(d["G"]), a, o,
                         d.get("residual", 0.0), tuple(s - 1 for s in d.get("seed", [])))


def format_roots(v, decimals: int) -> str:
    """Roots in table layout: reals as is, conjugate pairs as ``a±bi``."""
    v = np.asarray(v, dtype=complex)
    v = v[np.lexsort((v.imag, v.real))]
    tol = 0.5 * 10.0 ** (-decimals)
    parts, used = [], np.zeros(v.size, bool)
    for i, x in enumerate(v):
        if used[i]:
            continue
        used[i] = True
        if abs(x.imag) < tol:
            parts.append(f"{x.real:.{decimals}f}")
            continue
        j = next((k for k in range(v.size) if not used[k] and abs(v[k] - np.conj(x)) < 1e-6), None)
        if j is None:
            parts.append(f"{x.real:.{decimals}f}{x.imag:+.{decimals}f}i")
        else:
            used[j] = True
            parts.append(f"{x.real:.{decimals}f}±{abs(x.imag):.{decimals}f}i")
    return ",".join(parts)


def _fixed(x: float, decimals: int) -> str:
    # avoid printing "-0.000"
    s = f"{x:.{decimals}f}"
    return s[1:] if s.startswith("-") and not s.strip("-0.") else s


def table_csv(rootsets, decimals: int = 8) -> str:
    """CSV with header ``energy,roots``, rows sorted by ascending energy."""
    rows = sorted(rootsets, key=energy_from_roots)
    lines = ["energy,roots"]
    for rs in rows:
        lines.append(f"{_fixed(energy_from_roots(rs), decimals)},\"{format_roots(rs.v, decimals)}\"")
    return "\n".join(lines) + "\n"


def bethe_state(rs: RootSet) -> StateVector:
    from .states import build_bethe_state

    return build_bethe_state(rs)
