"""Spectral stochastic fields on the torus: randomized data, Wick powers and exact moments."""
from ._backend import BACKEND
from .lattice import FrequencyLattice, Shape, build_lattice, to_physical, to_spectral
from .spectral_data import (DataPair, HermitianCoeffs, admissible, fl_norm, p_critical,
                            pair_fl_norm, regularity_threshold, sobolev_norm)
from .randomize import RandomizedMultipliers, randomize_pair, sample_multipliers
from .linear_waves import (FieldSnapshot, GammaProfile, gamma_from_pair, gamma_power_law,
                           random_linear_solution, truncated_variance)
from .wick import WickPowerResult, hermite, wick_nonlinearity, wick_power
from .moment_oracle import (MomentReport, cross_moment, fl_bound_check,
                            second_moment_per_mode, tail_distance)
from .counterexample import (DyadicProfile, build_counterexample, divergence_rate_fit,
                             membership_report, restricted_sum, zeroth_mode_moment)
from .stochastic_conv import (MultiplierSpec, gamma_from_multiplier, heat_mode_variance,
                              sample_heat_convolution, sample_wave_convolution,
                              wave_mode_variance)
from .evolution import SolverConfig, WaveState, duhamel, solve_wick_nlw

__version__ = "0.1.0"
