"""Regions of the (1/g, x) plane, with g = GL and x = M/L.

Lines, all independent of the level set:

* Read-Green      x = (1 - 1/g) / 2   (V | IV for g > 0, II | III for g < 0)
* Moore-Read      x = 1 - 1/g         (IV | VI)
* highest-state   x = -1/g            (I | II), the Moore-Read line under
  the particle-hole map
* axis            1/g = 0

For g > 0: V strong pairing below Read-Green, IV weak pairing between
the lines, VI weak coupling above Moore-Read.  For g < 0: I below the
highest-state line, II between it and Read-Green, III above Read-Green.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bethe import RootClassification

BOUNDARY_TOL = 1e-12
REGIONS = ("I", "II", "III", "IV", "V", "VI")
BOUNDARIES = ("MooreRead", "ReadGreen", "HighestState", "axis")


class RegionError(ValueError):
    pass


def read_green(g_inv):
    return 0.5 * (1 - g_inv)


def moore_read(g_inv):
    return 1 - g_inv


def highest_state_line(g_inv):
    return -g_inv


@dataclass(frozen=True)
class PhasePoint:
    g_inv: float
    x: float
    region: str

    @property
    def is_boundary(self) -> bool:
        return self.region in BOUNDARIES


def classify(g_inv: float, x: float, tol: float = BOUNDARY_TOL) -> str:
    """Region label I..VI, or a boundary label within ``tol`` of a line."""
    if not -tol <= x <= 1 + tol:
        raise RegionError(f"filling x={x} outside [0, 1]")
    if abs(x - moore_read(g_inv)) <= tol:
        return "MooreRead"
    if abs(x - read_green(g_inv)) <= tol:
        return "ReadGreen"
    if abs(x - highest_state_line(g_inv)) <= tol:
        return "HighestState"
    if abs(g_inv) <= tol:
        return "axis"
    if g_inv > 0:
        if x < read_green(g_inv):
            return "V"
        return "IV" if x < moore_read(g_inv) else "VI"
    if x > read_green(g_inv):
        return "III"
    return "II" if x > highest_state_line(g_inv) else "I"


def phase_point(L: int, M: int, G: float) -> PhasePoint:
    g_inv = 1.0 / (G * L)
    x = M / L
    return PhasePoint(g_inv, x, classify(g_inv, x))


def dual_point(relation: str, g_inv: float, x: float):
    """Image of (1/g, x) under a duality or inversion (sector arithmetic / L).

    zero-pair: x' = 1 - 1/g - x; mixed (from H(G) block M to H(-G) block
    M + 1/G): x' = x + 1/g, 1/g' = -1/g; combined: x' = 1 - x, 1/g' = -1/g;
    inversion: 1/g' = 1 - 2x - 1/g.
    """
    if relation == "zeropair":
        return g_inv, 1 - g_inv - x
    if relation == "mixed":
        return -g_inv, x + g_inv
    if relation == "combined":
        return -g_inv, 1 - x
    if relation == "inversion":
        return 1 - 2 * x - g_inv, x
    raise ValueError(f"unknown relation {relation!r}")


def condensate_fractions(g_inv: float, x: float, mode: str = "thermodynamic",
                         L: int | None = None,
                         classification: RootClassification | None = None):
    """(h0, h_inf), the fractions of zero-energy and divergent hole pairs.

    ``thermodynamic`` uses h0 = 1 - 2x - 1/g and h_inf = 1/g.  ``finite``
    needs ``L`` and returns (J/L, K/L), from ``classification`` when given
    and otherwise from the integer counts J = L - 2M - 1/G, K = 1/G.
    """
    if mode == "thermodynamic":
        h0, hinf = 1 - 2 * x - g_inv, g_inv
    elif mode == "finite":
        if L is None:
            raise ValueError("finite mode needs L")
        if classification is not None:
            return classification.n_zero / L, classification.n_infinite / L
        K = g_inv * L
        J = L - 2 * x * L - K
        if abs(K - round(K)) > 1e-9 or abs(J - round(J)) > 1e-9:
            raise RegionError("finite counts need integer 1/G and M")
        h0, hinf = round(J) / L, round(K) / L
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if h0 < -BOUNDARY_TOL or hinf < -BOUNDARY_TOL:
        raise RegionError(f"negative condensate fraction at (1/g={g_inv}, x={x}); "
                          "point lies outside the strong-pairing region")
    return h0, hinf


def raster(g_inv_range=(-2.0, 2.0), n_g: int = 81, n_x: int = 41):
    """Rows (1/g, x, label) on a regular grid over the strip 0 <= x <= 1."""
    rows = []
    for gi in np.linspace(*g_inv_range, n_g):
        for x in np.linspace(0.0, 1.0, n_x):
            rows.append((float(gi), float(x), classify(float(gi), float(x))))
    return rows


def raster_csv(rows) -> str:
    lines = ["g_inv,x,region"]
    lines += [f"{g:.6f},{x:.6f},{r}" for g, x, r in rows]
    return "\n".join(lines) + "\n"
