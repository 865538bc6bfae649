"""Mean-field solutions, the Moore-Read line and the phase regions."""
# %%
import numpy as np

from pairsolve import LevelSet, Sector
from pairsolve.meanfield import (moore_read_coupling, mf_energies, projected_state,
                                 solve_gap_equations)
from pairsolve.model import StateVector, build_hamiltonian, diagonalize_sector
from pairsolve.phase import classify, phase_point, raster
from pairsolve.states import fidelity

levels = LevelSet.preset("paper8")

# %% on the Moore-Read line the projected BCS state is the exact ground state
for M in (2, 4, 6):
    G = moore_read_coupling(8, M)
    sol = solve_gap_equations(levels, G, M)
    E, V = diagonalize_sector(build_hamiltonian(levels, G, Sector(8, M)))
    f = fidelity(projected_state(sol), StateVector(Sector(8, M), V[:, 0]))
    print(f"M={M} G={G:.4f} Delta={sol.delta:.4f} mu={sol.mu:.4f} E0={E[0]:.1e} F={f:.12f}")

# %% away from the line the mean-field energy is only an estimate
sol = solve_gap_equations(levels, 0.3, 4)
print("mean field", mf_energies(sol, levels)[0],
      "exact", diagonalize_sector(build_hamiltonian(levels, 0.3, Sector(8, 4)))[0][0])

# %% regions
print(phase_point(8, 2, 0.5))
rows = raster(n_g=9, n_x=5)
labels = np.array([r for _, _, r in rows]).reshape(9, 5)
print(labels.T[::-1])
print(classify(1.0, 0.75), classify(0.25, 0.25), classify(-0.2, 0.1))
