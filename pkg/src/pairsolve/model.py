"""Hardcore-boson pairing model on L unblocked levels.

Everything here works inside a block of fixed pair number M.  The dense
Hamiltonian block and the sparse operator actions are the brute-force
reference that the Bethe Ansatz machinery is checked against.

Level indices are 0-based in the Python API.  Serialized forms (JSON,
CSV, command line) use 1-based indices.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

# Largest block we are willing to store densely (L = 16 at half filling).
MAX_DIM = 12870


class CapacityError(ValueError):
    """Sector too large for dense storage."""


class DiagonalizationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# model instance


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Single-pair energy parameters.

    ``z2`` holds z_l**2 and ``epsilon`` the Moebius images with
    z**2 = (1 + eps) / (1 - eps).  Build with one of the ``from_*``
    constructors so that both arrays stay consistent.
    """

    z2: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        z2 = np.asarray(self.z2, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if z2.ndim != 1 or z2.size < 1:
            raise ValueError("need at least one level")
        if z2.shape != eps.shape:
            raise ValueError("z2 and epsilon must have the same length")
        if not np.all(np.isfinite(z2)) or np.any(z2 <= 0):
            raise ValueError("all z_l must be positive")
        if np.any(np.abs(eps) >= 1):
            raise ValueError("epsilon must lie in (-1, 1)")
        s = np.sort(z2)
        if np.any(np.diff(s) <= 1e-12 * s[1:]):
            raise ValueError("level squares must be pairwise distinct")
        back = (z2 - 1) / (z2 + 1)
        if np.max(np.abs(back - eps)) > 1e-14:
            raise ValueError("z2 and epsilon are not Moebius images of each other")
        z2.setflags(write=False)
        eps.setflags(write=False)
        object.__setattr__(self, "z2", z2)
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def from_epsilon(cls, epsilon: Sequence[float]) -> "LevelSet":
        eps = np.asarray(epsilon, dtype=float)
        if np.any(np.abs(eps) >= 1):
            raise ValueError("epsilon must lie in (-1, 1)")
        return cls((1 + eps) / (1 - eps), eps)

    @classmethod
    def from_z2(cls, z2: Sequence[float]) -> "LevelSet":
        z2 = np.asarray(z2, dtype=float)
        return cls(z2, (z2 - 1) / (z2 + 1))

    @classmethod
    def from_z(cls, z: Sequence[float]) -> "LevelSet":
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise ValueError("all z_l must be positive")
        return cls.from_z2(z * z)

    @classmethod
    def preset(cls, name: str) -> "LevelSet":
        """Named level sets: ``paper8`` (eps_j = j/10, j = 1..8) and the
        inversion-closed ``inv4`` (z = 0.6, 0.8, 1.25, 5/3)."""
        if name == "paper8":
            return cls.from_epsilon(np.arange(1, 9) / 10)
        if name == "inv4":
            return cls.from_z([0.6, 0.8, 1.25, 5 / 3])
        m = re.fullmatch(r"paper(\d+)", name)
        if m:
            n = int(m.group(1))
            if not 1 <= n <= 9:
                raise ValueError("paperN presets need 1 <= N <= 9")
            return cls.from_epsilon(np.arange(1, n + 1) / 10)
        raise KeyError(f"unknown level preset {name!r}")

    @property
    def L(self) -> int:
        return self.z2.size

    @property
    def z(self) -> np.ndarray:
        return np.sqrt(self.z2)

    @property
    def total(self) -> float:
        """Sum of z_l**2, the energy of the completely filled state."""
        return float(self.z2.sum())

    def is_inversion_closed(self, tol: float = 1e-12) -> bool:
        a = np.sort(self.z2)
        b = np.sort(1 / self.z2)
        return bool(np.all(np.abs(a - b) <= tol * np.maximum(1, a)))

    def to_dict(self) -> dict:
        return {"epsilon": [float(e) for e in self.epsilon]}

    @classmethod
    def from_dict(cls, d: dict) -> "LevelSet":
        if "epsilon" in d:
            return cls.from_epsilon(d["epsilon"])
        if "z2" in d:
            return cls.from_z2(d["z2"])
        if "z" in d:
            return cls.from_z(d["z"])
        if "preset" in d:
            return cls.preset(d["preset"])
        raise ValueError("levels need one of 'epsilon', 'z2', 'z', 'preset'")


_COUPLING_RE = re.compile(r"^\s*([+-]?\d+(?:\.\d*)?(?:/\d+)?)\s*(?:([+-])\s*(\S+))?\s*$")


@dataclass(frozen=True)
class Coupling:
    """Coupling constant G, optionally an exact rational plus an offset.

    Critical couplings (integer 1/G) are written as ``target + offset`` so
    that every consumer sees the bit-identical float ``value``.
    """

    value: float
    target: Fraction | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.target is not None:
            v = float(self.target) + float(self.offset)
            object.__setattr__(self, "value", v)
        if not math.isfinite(self.value):
            raise ValueError("coupling must be finite")

    @classmethod
    def exact(cls, target, offset: float = 0.0) -> "Coupling":
        t = Fraction(target)
        return cls(float(t) + offset, t, float(offset))

    @classmethod
    def parse(cls, text: str) -> "Coupling":
        """Parse ``"1/2+1e-7"``, ``"-1/3"``, ``"0.37"`` or ``"1e-3"``."""
        m = _COUPLING_RE.match(text)
        if m:
            t = Fraction(m.group(1))
            off = 0.0
            if m.group(2):
                off = float(m.group(2) + m.group(3))
            return cls.exact(t, off)
        return cls(float(text))

    @classmethod
    def coerce(cls, G) -> "Coupling":
        if isinstance(G, Coupling):
            return G
        if isinstance(G, str):
            return cls.parse(G)
        if isinstance(G, Fraction):
            return cls.exact(G)
        return cls(float(G))

    def __float__(self) -> float:
        return self.value

    @property
    def g_inv(self) -> float:
        return 1.0 / self.value

    def integer_inverse(self, tol: float = 1e-9) -> int | None:
        """1/G as an int when the coupling sits on (or is offset from) an
        integer inverse, else None."""
        if self.target is not None and self.target != 0:
            inv = 1 / self.target
            return int(inv) if inv.denominator == 1 else None
        inv = 1.0 / self.value
        k = round(inv)
        return int(k) if abs(inv - k) <= tol * max(1, abs(inv)) else None

    def to_dict(self) -> dict:
        if self.target is not None:
            return {"target": str(self.target), "offset": self.offset}
        return {"value": self.value}

    @classmethod
    def from_dict(cls, d) -> "Coupling":
        if isinstance(d, (int, float, str)):
            return cls.coerce(d)
        if "target" in d:
            return cls.exact(Fraction(d["target"]), float(d.get("offset", 0.0)))
        return cls(float(d["value"]))

    def __str__(self) -> str:
        if self.target is None:
            return repr(self.value)
        if self.offset:
            return f"{self.target}{self.offset:+g}"
        return str(self.target)


def _gval(G) -> float:
    return G.value if isinstance(G, Coupling) else float(G)


@dataclass(frozen=True)
class Sector:
    """Block of fixed pair number M (P = L - M hole pairs).

    M outside [0, L] is allowed and denotes the empty block that
    annihilating the vacuum (or creating on the filled state) lands in.
    """

    L: int
    M: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")

    @classmethod
    def from_holes(cls, L: int, P: int) -> "Sector":
        return cls(L, L - P)

    @property
    def P(self) -> int:
        return self.L - self.M

    @property
    def is_empty(self) -> bool:
        return not 0 <= self.M <= self.L

    @property
    def dim(self) -> int:
        return 0 if self.is_empty else math.comb(self.L, self.M)

    def check(self):
        if self.is_empty:
            raise ValueError(f"sector M={self.M} outside [0, {self.L}]")
        if self.dim > MAX_DIM:
            raise CapacityError(f"sector dimension {self.dim} exceeds {MAX_DIM}")
        return self

    def shifted(self, dM: int) -> "Sector":
        return Sector(self.L, self.M + dM)

    def complement(self) -> "Sector":
        return Sector(self.L, self.L - self.M)


# ---------------------------------------------------------------------------
# basis


@lru_cache(maxsize=None)
def _basis(L: int, M: int) -> tuple:
    return tuple(itertools.combinations(range(L), M))


@lru_cache(maxsize=None)
def _index(L: int, M: int) -> dict:
    return {c: i for i, c in enumerate(_basis(L, M))}


def enumerate_sector_basis(sector: Sector) -> list[tuple[int, ...]]:
    """Occupied-level tuples of the block, in lexicographic order."""
    sector.check()
    return list(_basis(sector.L, sector.M))


def basis_index(sector: Sector) -> dict:
    sector.check()
    return _index(sector.L, sector.M)


@lru_cache(maxsize=None)
def _hops(L: int, M: int):
    """Creation transitions M -> M+1 as (source, target, level) arrays."""
    src, tgt, lev = [], [], []
    index_up = _index(L, M + 1)
    for i, c in enumerate(_basis(L, M)):
        occ = set(c)
        for l in range(L):
            if l not in occ:
                src.append(i)
                tgt.append(index_up[tuple(sorted(occ | {l}))])
                lev.append(l)
    return (np.array(src, dtype=np.intp), np.array(tgt, dtype=np.intp),
            np.array(lev, dtype=np.intp))


@lru_cache(maxsize=None)
def _complement_perm(L: int, M: int) -> np.ndarray:
    index = _index(L, L - M)
    full = set(range(L))
    return np.array([index[tuple(sorted(full - set(c)))] for c in _basis(L, M)],
                    dtype=np.intp)


# ---------------------------------------------------------------------------
# Hamiltonian block


def build_hamiltonian(levels: LevelSet, G, sector: Sector) -> np.ndarray:
    """Dense block of H(G) = (1 + G) H0 - G Qdag Q at fixed M.

    Diagonal: sum of z_l**2 over occupied levels.  Off-diagonal: -G z_l z_k
    between configurations related by moving one pair from k to l.
    """
    sector.check()
    if sector.L != levels.L:
        raise ValueError("sector and level set disagree on L")
    G = _gval(G)
    L, M = sector.L, sector.M
    z2 = levels.z2
    z = levels.z
    basis = _basis(L, M)
    d = len(basis)
    H = np.zeros((d, d))
    for i, c in enumerate(basis):
        H[i, i] = z2[list(c)].sum()
    if 0 < M < L:
        # a hop k -> l is an annihilation on k followed by a creation on l
        src, tgt, lev = _hops(L, M - 1)
        # group transitions by the (M-1)-configuration they pass through
        order = np.argsort(src, kind="stable")
        src, tgt, lev = src[order], tgt[order], lev[order]
        bounds = np.flatnonzero(np.diff(src)) + 1
        for t_idx, l_idx in zip(np.split(tgt, bounds), np.split(lev, bounds)):
            w = z[l_idx]
            block = -G * np.outer(w, w)
            np.fill_diagonal(block, 0.0)
            H[np.ix_(t_idx, t_idx)] += block
    return H


def diagonalize_sector(H: np.ndarray):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric block."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise DiagonalizationError(f"eigh failed on matrix {_fingerprint(H)}") from exc
    scale = max(np.linalg.norm(H, 2) if H.size else 0.0, 1e-300)
    res = np.linalg.norm(H @ V - V * w, axis=0) if H.size else np.zeros(0)
    if res.size and res.max() > 1e-10 * scale:
        raise DiagonalizationError(
            f"eigen-residual {res.max():.3e} too large for matrix {_fingerprint(H)}")
    return w, V


def _fingerprint(H: np.ndarray) -> str:
    digest = hashlib.sha1(np.ascontiguousarray(H).tobytes()).hexdigest()[:12]
    return f"shape={H.shape} trace={np.trace(H):.6g} sha1={digest}"


def sector_spectrum(levels: LevelSet, G, sector: Sector) -> np.ndarray:
    return diagonalize_sector(build_hamiltonian(levels, G, sector))[0]


# ---------------------------------------------------------------------------
# states and operators


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes over the canonical basis of one block (unnormalized)."""

    sector: Sector
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.sector.dim,):
            raise ValueError(f"expected {self.sector.dim} amplitudes, got {amp.shape}")
        if not np.all(np.isfinite(amp)):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def zero(cls, sector: Sector) -> "StateVector":
        return cls(sector, np.zeros(sector.dim, dtype=complex))

    @classmethod
    def basis_state(cls, sector: Sector, occupied) -> "StateVector":
        amp = np.zeros(sector.dim, dtype=complex)
        amp[basis_index(sector)[tuple(sorted(occupied))]] = 1.0
        return cls(sector, amp)

    @classmethod
    def vacuum(cls, L: int) -> "StateVector":
        return cls(Sector(L, 0), np.ones(1))

    @classmethod
    def filled(cls, L: int) -> "StateVector":
        """The completely filled state |chi>."""
        return cls(Sector(L, L), np.ones(1))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_zero(self) -> bool:
        return self.sector.dim == 0 or not np.any(self.amplitudes)

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.sector, self.amplitudes / n)

    def scaled(self, c) -> "StateVector":
        return StateVector(self.sector, c * self.amplitudes)

    def to_json(self) -> list:
        return [{"config": [l + 1 for l in c], "amp": [a.real, a.imag]}
                for c, a in zip(_basis(self.sector.L, self.sector.M), self.amplitudes)]

    @classmethod
    def from_json(cls, items: list, L: int) -> "StateVector":
        if not items:
            raise ValueError("empty state listing")
        M = len(items[0]["config"])
        sector = Sector(L, M)
        amp = np.zeros(sector.dim, dtype=complex)
        index = basis_index(sector)
        for it in items:
            amp[index[tuple(sorted(l - 1 for l in it["config"]))]] = complex(*it["amp"])
        return cls(sector, amp)


def create(coeffs, state: StateVector) -> StateVector:
    """Apply sum_l coeffs[l] b_l^dagger."""
    L, M = state.sector.L, state.sector.M
    target = state.sector.shifted(+1)
    if state.sector.is_empty or target.is_empty:
        return StateVector.zero(target)
    coeffs = np.asarray(coeffs)
    src, tgt, lev = _hops(L, M)
    out = np.zeros(target.dim, dtype=complex)
    np.add.at(out, tgt, coeffs[lev] * state.amplitudes[src])
    return StateVector(target, out)


def annihilate(coeffs, state: StateVector) -> StateVector:
    """Apply sum_l coeffs[l] b_l."""
    L, M = state.sector.L, state.sector.M
    target = state.sector.shifted(-1)
    if state.sector.is_empty or target.is_empty:
        return StateVector.zero(target)
    coeffs = np.asarray(coeffs)
    src, tgt, lev = _hops(L, M - 1)
    out = np.zeros(target.dim, dtype=complex)
    np.add.at(out, src, coeffs[lev] * state.amplitudes[tgt])
    return StateVector(target, out)


def pair_coefficients(levels: LevelSet, y) -> np.ndarray:
    """Coefficients z_l / (y - z_l**2) shared by C(y) and B(y)."""
    d = y - levels.z2
    if np.any(d == 0):
        raise ZeroDivisionError(f"y={y} coincides with a level square")
    return levels.z / d


_CREATION = {"Qdag", "C0"}
_ANNIHILATION = {"Q", "B0"}


def apply_operator(op: str, state: StateVector, levels: LevelSet) -> StateVector:
    """Apply one of ``Q``, ``Qdag``, ``C0`` (= C(0)) or ``B0`` (= B(0)).

    Also accepts ``N`` and ``H0``, which are diagonal.
    """
    if op in ("Q", "Qdag"):
        coeffs = levels.z
    elif op in ("C0", "B0"):
        coeffs = -1.0 / levels.z
    elif op == "N":
        return state.scaled(state.sector.M)
    elif op == "H0":
        if state.sector.dim == 0:
            return state
        diag = np.array([levels.z2[list(c)].sum() for c in _basis(state.sector.L, state.sector.M)])
        return StateVector(state.sector, diag * state.amplitudes)
    else:
        raise ValueError(f"unknown operator {op!r}")
    if op in _CREATION:
        return create(coeffs, state)
    return annihilate(coeffs, state)


def apply_hamiltonian(levels: LevelSet, G, state: StateVector) -> StateVector:
    G = _gval(G)
    h0 = apply_operator("H0", state, levels)
    qq = apply_operator("Qdag", apply_operator("Q", state, levels), levels)
    return StateVector(state.sector, (1 + G) * h0.amplitudes - G * qq.amplitudes)


def particle_hole_transform(state: StateVector) -> StateVector:
    """Map occupied <-> empty on every level."""
    L, M = state.sector.L, state.sector.M
    target = state.sector.complement()
    if state.sector.is_empty:
        return StateVector.zero(target)
    out = np.zeros(target.dim, dtype=complex)
    out[_complement_perm(L, M)] = state.amplitudes
    return StateVector(target, out)


def fock_matrix(op: str, levels: LevelSet, G=None) -> np.ndarray:
    """Dense matrix of an operator on the full 2**L space (small L only).

    Basis order is by M, then lexicographic within the block.  ``op`` is any
    name accepted by :func:`apply_operator`, or ``"H"`` (needs ``G``).
    """
    L = levels.L
    if L > 10:
        raise CapacityError("full Fock-space matrices are limited to L <= 10")
    offsets = np.cumsum([0] + [math.comb(L, M) for M in range(L + 1)])
    dim = offsets[-1]
    A = np.zeros((dim, dim), dtype=complex)
    for M in range(L + 1):
        sector = Sector(L, M)
        for i in range(sector.dim):
            e = np.zeros(sector.dim)
            e[i] = 1
            s = StateVector(sector, e)
            out = apply_hamiltonian(levels, G, s) if op == "H" else apply_operator(op, s, levels)
            if out.sector.is_empty:
                continue
            o = offsets[out.sector.M]
            A[o:o + out.sector.dim, offsets[M] + i] = out.amplitudes
    return A


# ---------------------------------------------------------------------------
# run configuration and spectrum output


def parse_run_config(d: dict):
    """Return ``(levels, sector, coupling)`` from the JSON run-config."""
    levels = LevelSet.from_dict(d["levels"]) if "levels" in d else LevelSet.preset("paper8")
    L = int(d.get("L", levels.L))
    if L != levels.L:
        raise ValueError(f"L={L} but {levels.L} levels given")
    if "M" in d:
        sector = Sector(L, int(d["M"]))
    elif "P" in d:
        sector = Sector.from_holes(L, int(d["P"]))
    else:
        raise ValueError("run config needs M or P")
    coupling = Coupling.from_dict(d["G"])
    return levels, sector, coupling


def run_config_dict(levels: LevelSet, sector: Sector, coupling: Coupling, holes=False) -> dict:
    d = {"L": sector.L}
    if holes:
        d["P"] = sector.P
    else:
        d["M"] = sector.M
    d["levels"] = levels.to_dict()
    d["G"] = coupling.to_dict()
    return d


def spectrum_csv(energies) -> str:
    lines = ["index,energy"]
    lines += [f"{i},{e:.12f}" for i, e in enumerate(energies)]
    return "\n".join(lines) + "\n"


def spectrum_json(energies, levels: LevelSet, sector: Sector, coupling: Coupling) -> dict:
    d = run_config_dict(levels, sector, coupling)
    d["energies"] = [float(e) for e in energies]
    return d
