"""
Magnetization through a linear ramp
===================================

Start in the ground state of the fields, switch the couplings on over a
time T and follow the total x magnetization. Slow ramps stay close to
the instantaneous ground state and barely fluctuate afterwards.
"""

from finitequench.config import ExperimentConfig
from finitequench.experiments import run_timeseries

config = ExperimentConfig().with_overrides(chain={"n": 6}, timeseries={"post_ramp_time": 100.0})

for T in (0.01, 1.0, 10.0, 100.0):
    series = run_timeseries(config, T=T)
    print(f"T={T:<6g} <Sx> after ramp in [{series.post_ramp.min():+.3f}, {series.post_ramp.max():+.3f}]"
          f"  std {series.post_ramp_std:.3e}")

# Pass out_dir to write the series as CSV for plotting:
# run_timeseries(config, T=1.0, out_dir="results")
