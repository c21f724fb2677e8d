"""
Effective dimension and the fluctuation bound
=============================================

The interaction-picture state settles once the couplings stop changing.
Its level populations fix an effective dimension d_eff, and the long-time
fluctuations of <Sx> stay below ||Sx||**2 / d_eff.
"""

from finitequench.config import ExperimentConfig
from finitequench.experiments import analyze_cell

config = ExperimentConfig()

print(" N      T     d_eff   fluct(signal)  fluct(closed)    bound")
for n in range(3, 8):
    for T in (0.01, 100.0):
        r = analyze_cell(config, n, T)
        print(f"{n:2d} {T:7g} {r.d_eff:9.3f} {r.fluct_empirical:14.4e} {r.fluct_closed:14.4e} {r.bound:10.4f}")

# A slow ramp spreads the state over many more levels, so the bound tightens.
