"""Root sets of the L=8 model just above 1/G = 2, and how they collapse."""
# %%
from fractions import Fraction

import numpy as np

from pairsolve import LevelSet, Sector
from pairsolve.bethe import Picture, classify_roots, enumerate_spectrum, format_roots
from pairsolve.model import Coupling, sector_spectrum

levels = LevelSet.preset("paper8")
G = Coupling.exact(Fraction(1, 2), 1e-7)
print("levels z^2:", np.round(levels.z2, 4))

# %% three hole pairs: 56 states, all regular roots
rs = sorted(enumerate_spectrum(levels, G, Sector.from_holes(8, 3), Picture.HOLE),
            key=lambda r: r.energy)
for r in rs[:5]:
    print(f"{r.energy:12.5f}  {format_roots(r.v, 5)}")

# %% six hole pairs: every state has 2 roots at y ~ 0 and 2 at y ~ infinity
rs = sorted(enumerate_spectrum(levels, G, Sector.from_holes(8, 6), Picture.HOLE),
            key=lambda r: r.energy)
for r in rs[:5]:
    c = classify_roots(r)
    print(f"{r.energy:14.8f}  zero={c.n_zero} inf={c.n_infinite}  {format_roots(r.v, 8)}")

# %% Bethe energies against exact diagonalization
ed = sector_spectrum(levels, G, Sector.from_holes(8, 6))
print("max |E_bethe - E_ed| =", np.max(np.abs(np.sort([r.energy for r in rs]) - ed)))
