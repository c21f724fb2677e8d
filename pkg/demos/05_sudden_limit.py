"""
Very fast ramps are sudden quenches
===================================

As T goes to zero the ramp and the instantaneous quench give the same
dynamics, and d_eff reduces to 1 / sum_n |<E_n|psi0>|**4.
"""

from finitequench.config import ExperimentConfig
from finitequench.experiments import quench_compare

config = ExperimentConfig()
for T in (1e-1, 1e-2, 1e-4):
    r = quench_compare(config, n=5, T=T)
    print(f"T={T:<6g} max |<Sx>_ramp - <Sx>_sudden| = {r.max_difference:.2e}"
          f"  d_eff {r.d_eff_ramp:.6f} vs {r.d_eff_quench:.6f}")
