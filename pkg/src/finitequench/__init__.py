"""Finite-time quenches of spin chains and equilibration on average.

Build a chain Hamiltonian, switch its couplings on with a schedule, evolve a
state through the switch and measure how far expectation values stray from
their infinite-time average.

>>> from finitequench import ChainSpec, build_hamiltonian_parts, QuenchProtocol, Quench
>>> parts = build_hamiltonian_parts(ChainSpec(n_sites=3))
>>> q = Quench(parts, QuenchProtocol.linear_ramp(1.0))
>>> q.lam(0.5)
0.5
"""

from .dyson_bounds import (BoundSample, rhs_convergence_bound, rhs_propagator_bound,
                           rhs_zeta_bound, verify_coefficient_bounds, verify_propagator_bound)
from .equilibration import (AverageState, EquilibrationReport, average_state_empirical,
                            average_state_from_limit, effective_dimension,
                            fluctuation_chain, fluctuation_closed_form, fluctuation_empirical,
                            quench_effective_dimension, theorem_bound, time_average_expectation)
from .errors import (AbortedRunError, ConfigError, InvalidArgumentError, InvalidStateError,
                     NumericalError, UncertifiableProtocolError)
from .evolution import (IntegratorConfig, Trajectory, evolve, ground_state,
                        interaction_propagator, to_interaction_picture)
from .protocols import DecayCertificate, ProtocolKind, Quench, QuenchProtocol, lambda_at
from .spectral import (GapReport, SpectralDecomposition, check_gap_degeneracy, coefficients,
                       diagonalize, rotate_degenerate_blocks)
from .spin_algebra import (ChainSpec, Convention, HamiltonianParts, build_hamiltonian_parts,
                           expectation, operator_norm, single_site_operator, total_spin)

__version__ = "0.1.0"
