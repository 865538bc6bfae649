"""Eigenstates carried between blocks by pair dressing at integer 1/G."""
# %%
from fractions import Fraction

from pairsolve import LevelSet, Sector
from pairsolve.duality import dimension_inequality_check, verify_duality_pairing
from pairsolve.model import Coupling

levels = LevelSet.preset("paper8")
half = Coupling.exact(Fraction(1, 2))

# %% Q^2 from H(-1/2) with P=1 into H(1/2) with P=3: injective, rank 8 of 56
rep = verify_duality_pairing("mixed", levels, half, Sector.from_holes(8, 1))
print("mixed:", rep.gram_rank, "of", rep.target_sector.dim, "target states reached:",
      rep.n_reached, "max residual", f"{rep.max_residual:.1e}")

# %% Q^2 B(0)^2 from P=2 to P=6: a bijection between 28-dimensional blocks
rep = verify_duality_pairing("combined", levels, half, Sector.from_holes(8, 2))
print("combined:", rep.gram_rank, "injective", rep.injective, "surjective", rep.surjective)

# %% zero-energy pairs at 1/G = 1 link M=2 and M=5 with equal energies
rep = verify_duality_pairing("zeropair", levels, Coupling.exact(Fraction(1)), Sector(8, 2))
print("zero-pair:", rep.source_sector, "->", rep.target_sector,
      "max residual", f"{rep.max_residual:.1e}")

# %% the smaller block of every zero-pair duality never has more states
print("dimension violations up to L=30:", len(dimension_inequality_check(30).violations))
