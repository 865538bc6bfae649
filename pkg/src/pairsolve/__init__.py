"""Exact and mean-field solutions of the p+ip pairing Hamiltonian.

H(G) = (1 + G) sum_l z_l**2 N_l - G Q^dagger Q on L levels, solved by
exact diagonalization and by Bethe Ansatz equations in both the
particle-pair and hole-pair pictures.
"""

from .bethe import (Picture, RootClassification, RootSet, bae_jacobian, bae_residual,
                    classify_roots, continuation_solve, energy_from_roots, enumerate_spectrum,
                    moebius, moebius_inverse, newton_solve)
from .duality import (DressingSpec, Relation, apply_dressing, dimension_inequality_check,
                      dual_sector, inversion_map, verify_duality_pairing)
from .meanfield import gap_residual, mf_energies, projected_state, solve_gap_equations
from .model import (Coupling, LevelSet, Sector, StateVector, apply_operator, build_hamiltonian,
                    diagonalize_sector, enumerate_sector_basis, particle_hole_transform,
                    sector_spectrum)
from .phase import PhasePoint, classify, condensate_fractions
from .states import build_bethe_state, eigen_residual, overlap, permanent

__version__ = "0.1.0"
