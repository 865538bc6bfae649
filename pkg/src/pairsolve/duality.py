"""Dualities between blocks at integer 1/G, and root-set inversion.

* zero-pair: same coupling, M + M' = L - 1/G, states linked by C(0)**J
  or B(0)**J with equal energies
* mixed: H(-G) in block M' to H(G) in block M = M' - K through Q**K,
  K = 1/G, with E + E' = sum(z**2)
* combined: Q**K B(0)**J from block M' of H(-G) to block L - M' of H(G)
* inversion: y -> 1/y on an inversion-closed level set, which changes
  the coupling to 1/G~ = -1/G + 2P - L (hole picture)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb

import numpy as np

from .bethe import Picture, RootSet, _make_rootset, scaled_residual
from .model import (Coupling, LevelSet, Sector, StateVector, apply_operator,
                    build_hamiltonian, diagonalize_sector)
from .states import eigen_residual

GRAM_CUTOFF = 1e-8


class InapplicableDualityError(ValueError):
    pass


class Relation(str, Enum):
    ZERO_PAIR = "zeropair"
    MIXED = "mixed"
    COMBINED = "combined"
    INVERSION = "inversion"


@dataclass(frozen=True)
class DressingSpec:
    """Q**K applied after C(0)**J (``creation``) or B(0)**J (``annihilation``)."""

    J: int = 0
    K: int = 0
    creation: bool = False

    def __post_init__(self):
        if self.J < 0 or self.K < 0:
            raise ValueError("J and K must be non-negative")

    @property
    def shift(self) -> int:
        return (self.J if self.creation else -self.J) - self.K


def _integer_inverse(G) -> int:
    c = Coupling.coerce(G)
    k = c.integer_inverse()
    if k is None:
        raise InapplicableDualityError(f"1/G = {c.g_inv:.12g} is not an integer")
    return k


def dual_sector(relation, sector: Sector, G) -> Sector:
    """Partner block of ``sector`` under ``relation``.

    For the mixed relation ``sector`` is the H(G) block M and the result
    is the H(-G) block M' = M + 1/G.
    """
    relation = Relation(relation)
    L, M = sector.L, sector.M
    if relation is Relation.INVERSION:
        return sector
    K = _integer_inverse(G)
    if relation is Relation.ZERO_PAIR:
        Mp = L - K - M
    elif relation is Relation.MIXED:
        Mp = M + K
    else:
        Mp = L - M
    if not 0 <= Mp <= L:
        raise InapplicableDualityError(f"partner block M'={Mp} outside [0, {L}]")
    return Sector(L, Mp)


def dressing_for(relation, source: Sector, G) -> DressingSpec:
    """Dressing that carries eigenstates of the source block to the partner.

    The source is at coupling G (zero-pair) or -G (mixed, combined)."""
    relation = Relation(relation)
    L, Mp = source.L, source.M
    K = _integer_inverse(G)
    if relation is Relation.ZERO_PAIR:
        J = L - 2 * Mp - K
        return DressingSpec(J=abs(J), creation=J >= 0)
    if K < 0:
        raise InapplicableDualityError("mixed and combined maps need 1/G > 0")
    if relation is Relation.MIXED:
        return DressingSpec(K=K)
    if relation is Relation.COMBINED:
        J = 2 * Mp - K - L
        if J < 0:
            raise InapplicableDualityError(f"combined map needs J = 2M' - 1/G - L >= 0, got {J}")
        return DressingSpec(J=J, K=K)
    raise InapplicableDualityError("inversion acts on root sets, not states")


def apply_dressing(state: StateVector, spec: DressingSpec, levels: LevelSet) -> StateVector:
    """Q**K (C(0) or B(0))**J |state>; blocks outside [0, L] give a zero state."""
    op = "C0" if spec.creation else "B0"
    for _ in range(spec.J):
        state = apply_operator(op, state, levels)
    for _ in range(spec.K):
        state = apply_operator("Q", state, levels)
    return state


@dataclass
class DualityPair:
    E_src: float
    E_img: float
    residual: float | None
    img_norm: float


@dataclass
class DualityReport:
    relation: Relation
    L: int
    G: Coupling
    source_sector: Sector
    target_sector: Sector
    pairs: list
    gram_rank: int
    # squared projection of each target eigenvector on the image span
    target_weights: np.ndarray = field(repr=False)

    @property
    def n_kernel(self) -> int:
        return sum(1 for p in self.pairs if p.residual is None)

    @property
    def n_reached(self) -> int:
        return int(np.sum(self.target_weights > 0.5))

    @property
    def injective(self) -> bool:
        return self.gram_rank == self.source_sector.dim

    @property
    def surjective(self) -> bool:
        return self.gram_rank == self.target_sector.dim

    @property
    def max_residual(self) -> float:
        r = [p.residual for p in self.pairs if p.residual is not None]
        return max(r) if r else 0.0

    def to_json(self) -> dict:
        return {
            "relation": self.relation.value,
            "L": self.L,
            "G": str(self.G),
            "source_sector": {"P": self.source_sector.P},
            "target_sector": {"P": self.target_sector.P},
            "pairs": [{"E_src": p.E_src, "E_img": p.E_img, "residual": p.residual,
                       "img_norm": p.img_norm} for p in self.pairs],
            "gram_rank": self.gram_rank,
        }


def gram_rank(images: np.ndarray, cutoff: float = GRAM_CUTOFF) -> int:
    """Numerical rank of the columns of ``images``."""
    if images.size == 0:
        return 0
    s = np.linalg.svd(images, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > cutoff * s[0]))


def verify_duality_pairing(relation, levels: LevelSet, G, source: Sector) -> DualityReport:
    """Map every exact eigenstate of ``source`` through the duality.

    ``G`` is the coupling of the target Hamiltonian.  The source block is
    diagonalized at G (zero-pair) or -G (mixed, combined).
    """
    relation = Relation(relation)
    coupling = Coupling.coerce(G)
    g = coupling.value
    spec = dressing_for(relation, source, coupling)
    target = source.shifted(spec.shift)
    if target.is_empty:
        raise InapplicableDualityError(f"dressing leaves the allowed range (M={target.M})")
    g_src = g if relation is Relation.ZERO_PAIR else -g
    E_src, V = diagonalize_sector(build_hamiltonian(levels, g_src, source))
    total = levels.total
    pairs, images = [], []
    for E, vec in zip(E_src, V.T):
        img = apply_dressing(StateVector(source, vec), spec, levels)
        E_img = E if relation is Relation.ZERO_PAIR else total - E
        n = img.norm
        # images below this norm are treated as annihilated
        res = eigen_residual(img, levels, g, energy=E_img) if n > 1e-10 else None
        pairs.append(DualityPair(float(E), float(E_img), res, float(n)))
        images.append(img.amplitudes)
    A = np.array(images).T
    rank = gram_rank(A)
    _, W = diagonalize_sector(build_hamiltonian(levels, g, target))
    if rank:
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        U = U[:, s > GRAM_CUTOFF * s[0]]
        weights = np.sum(np.abs(U.conj().T @ W) ** 2, axis=0)
    else:
        weights = np.zeros(target.dim)
    return DualityReport(relation, source.L, coupling, source, target, pairs, rank, weights)


@dataclass
class InequalityReport:
    L_max: int
    checked: int
    violations: list


def dimension_inequality_check(L_max: int = 30) -> InequalityReport:
    """Scan M + M' = L - K (K >= 1) with M <= M' and test C(L, M') >= C(L, M)."""
    if L_max > 30:
        raise ValueError("L_max is capped at 30")
    checked, bad = 0, []
    for L in range(1, L_max + 1):
        for K in range(1, L + 1):
            for M in range(0, (L - K) // 2 + 1):
                Mp = L - K - M
                checked += 1
                if comb(L, Mp) < comb(L, M):
                    bad.append((L, K, M, Mp))
    return InequalityReport(L_max, checked, bad)


def inverted_coupling(G, picture, sector: Sector) -> Coupling:
    """1/G~ = -1/G + 2P - L (hole) or -1/G - 2M + L (particle)."""
    c = Coupling.coerce(G)
    picture = Picture(picture)
    shift = 2 * sector.P - sector.L if picture is Picture.HOLE else sector.L - 2 * sector.M
    if c.target is not None and c.offset == 0:
        inv = -1 / c.target + shift
        if inv == 0:
            raise ZeroDivisionError("inverted coupling is infinite")
        return Coupling.exact(1 / Fraction(inv))
    inv = -1.0 / c.value + shift
    if inv == 0:
        raise ZeroDivisionError("inverted coupling is infinite")
    return Coupling(1.0 / inv)


def inversion_map(rs: RootSet, levels: LevelSet | None = None) -> RootSet:
    """Send every root y to 1/y (v to -v) and the coupling to G~."""
    levels = rs.levels if levels is None else levels
    if not levels.is_inversion_closed():
        raise ValueError("level set is not closed under z -> 1/z")
    if rs.n_roots and np.any(np.abs(rs.v + 1) == 0):
        raise ZeroDivisionError("a zero root has no inverse")
    coupling = inverted_coupling(rs.coupling, rs.picture, rs.sector)
    out = _make_rootset(rs.picture, levels, rs.sector, coupling, -rs.anchor, -rs.offset,
                        0.0, rs.seed, rs.conjugation_defect)
    return _make_rootset(rs.picture, levels, rs.sector, coupling, out.anchor, out.offset,
                         scaled_residual(out), rs.seed, rs.conjugation_defect)


def sigma_identity_defect(rs: RootSet, T: int | None = None, tau: float = 1e-2,
                          refine: bool = True) -> float:
    """|sum(z**2) - (1 - 1/T) sigma - 2 sum_{Y'} y| for a hole-picture set
    near 1/G = T, with sigma the sum over the roots near y = infinity."""
    from .bethe import classify_roots, refine_roots

    if T is None:
        T = _integer_inverse(rs.coupling)
    if refine:
        rs = refine_roots(rs)
    cls = classify_roots(rs, tau, tau)
    y = rs.y
    inf = cls.infinite_mask
    return float(abs(rs.levels.total - (1 - 1 / T) * y[inf].sum() - 2 * y[~inf].sum()))
