"""Product eigenstates built from Bethe roots.

Pair operators of different levels commute and square to zero, so
expanding prod_j C(y_j)|0> gives, for each configuration c, the
permanent of the matrix A_jk = z_{c_k} / (y_j - z_{c_k}**2).  The hole
picture prod_j B(y_j)|chi> is the same construction on the empty levels.
"""

from __future__ import annotations

import numpy as np

from .bethe import Picture, RootSet, energy_from_roots
from .model import (CapacityError, LevelSet, Sector, StateVector, _basis, _complement_perm,
                    apply_hamiltonian)

MAX_PERMANENT = 16


class PoleError(ZeroDivisionError):
    pass


def permanent(A) -> complex:
    """Permanent by Ryser's formula with Gray-code ordering, O(2**n n)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("permanent needs a square matrix")
    return complex(batch_permanent(A[None])[0])


def batch_permanent(A) -> np.ndarray:
    """Permanents of a stack of square matrices with shape (k, n, n)."""
    A = np.asarray(A, dtype=complex)
    k, n, m = A.shape
    if n != m:
        raise ValueError("permanent needs square matrices")
    if n > MAX_PERMANENT:
        raise CapacityError(f"permanent of size {n} exceeds cap {MAX_PERMANENT}")
    if n == 0:
        return np.ones(k, dtype=complex)
    row = np.zeros((k, n), dtype=complex)
    total = np.zeros(k, dtype=complex)
    in_set = np.zeros(n, dtype=bool)
    gray = 0
    for step in range(1, 2 ** n):
        j = (step & -step).bit_length() - 1
        gray ^= 1 << j
        if in_set[j]:
            row -= A[:, :, j]
        else:
            row += A[:, :, j]
        in_set[j] = not in_set[j]
        # (-1)**|S| with |S| = popcount(gray)
        total += (-1) ** bin(gray).count("1") * np.prod(row, axis=1)
    return (-1) ** n * total


def amplitude_matrix(levels: LevelSet, y, cols) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    z = levels.z[list(cols)]
    d = y[:, None] - (z * z)[None, :]
    return z[None, :] / d


def _check_poles(levels: LevelSet, y):
    for j, yj in enumerate(np.atleast_1d(y)):
        hit = np.flatnonzero(np.abs(yj - levels.z2) <= 1e-12 * np.maximum(1.0, levels.z2))
        if hit.size:
            raise PoleError(f"root {j} (y={yj:.6g}) coincides with level {hit[0] + 1}")


def product_state(levels: LevelSet, y, sector: Sector, picture) -> StateVector:
    """prod C(y_j)|0> (particle) or prod B(y_j)|chi> (hole) in ``sector``."""
    picture = Picture(picture)
    y = np.asarray(y, dtype=complex)
    _check_poles(levels, y)
    L, M = sector.L, sector.M
    configs = np.array(_basis(L, M), dtype=int).reshape(sector.dim, M)
    if picture is Picture.HOLE:
        # columns are the empty levels of each configuration
        comp = np.array(_basis(L, L - M), dtype=int).reshape(sector.dim, L - M)
        cols = np.empty_like(comp)
        cols[_complement_perm(L, L - M)] = comp
    else:
        cols = configs
    if y.size != cols.shape[1]:
        raise ValueError(f"expected {cols.shape[1]} roots, got {y.size}")
    z = levels.z
    zc = z[cols]
    mats = zc[:, None, :] / (y[None, :, None] - (zc * zc)[:, None, :])
    return StateVector(sector, batch_permanent(mats))


def build_bethe_state(rs: RootSet) -> StateVector:
    """Unnormalized eigenstate labelled by a solved root set."""
    return product_state(rs.levels, rs.y, rs.sector, rs.picture)


def eigen_residual(state: StateVector, levels: LevelSet, G, sector: Sector | None = None,
                   energy: float | None = None) -> float:
    """||H psi - E psi|| / ||psi||.

    ``energy`` defaults to the Rayleigh quotient of ``state``.
    """
    if sector is not None and sector != state.sector:
        raise ValueError("state is not in the given sector")
    n = state.norm
    if n == 0:
        raise ValueError("eigen-residual of the zero state is undefined")
    Hpsi = apply_hamiltonian(levels, G, state).amplitudes
    psi = state.amplitudes
    if energy is None:
        energy = (np.vdot(psi, Hpsi) / n ** 2).real
    return float(np.linalg.norm(Hpsi - energy * psi) / n)


def rootset_residual(rs: RootSet) -> float:
    return eigen_residual(build_bethe_state(rs), rs.levels, rs.coupling.value, rs.sector,
                          energy_from_roots(rs))


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b> in the canonical basis."""
    if a.sector != b.sector:
        raise ValueError(f"sector mismatch: {a.sector} vs {b.sector}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>| / (||a|| ||b||)."""
    return abs(overlap(a, b)) / (a.norm * b.norm)


def subspace_fidelity(state: StateVector, basis: np.ndarray) -> float:
    """Norm of the projection of the normalized state onto the span of the
    orthonormal columns of ``basis`` (used for degenerate eigenspaces)."""
    psi = state.amplitudes / state.norm
    return float(np.linalg.norm(basis.conj().T @ psi))
