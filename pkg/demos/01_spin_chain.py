"""
The defect spin chain
=====================

Build the chain Hamiltonian from Kronecker products, look at the final
spectrum and check whether any two energy gaps coincide.
"""

import numpy as np

from finitequench import ChainSpec, build_hamiltonian_parts, check_gap_degeneracy, diagonalize, operator_norm

# Fields on every site, a defect field on site 1, couplings at unit strength.
spec = ChainSpec(n_sites=6)
parts = build_hamiltonian_parts(spec)
h_final = parts.h_static + spec.j1_final * parts.h_j1 + spec.j2_final * parts.h_j2
print("dimension", parts.dim, " ||H_final||", round(operator_norm(h_final), 4))

# The static part alone is a sum of single-site fields.
print("ground energy of the fields:", np.linalg.eigvalsh(parts.h_static)[0])

# Distinct levels and the gap scan.
levels = diagonalize(h_final)
gaps = check_gap_degeneracy(levels)
print(levels.n_levels, "distinct levels, largest block", levels.block_sizes.max())
print("smallest |gap - gap'|:", gaps.min_gap_difference, " non-degenerate:", gaps.non_degenerate)
