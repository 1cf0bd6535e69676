"""Ground states of XY spin chains in site-dependent in-plane fields.

Matrix product states evolved in imaginary time (TEBD), an exact
diagonalization oracle for short chains, scaling analysis, and a batch
experiment harness.
"""

from .model import (Explicit, GaussianRandom, Sinusoidal, SpinChainModel, Staggered, Uniform,
                    build_field, build_gates, sigma_along_axis)
from .mps import MatrixProductState, TruncationPolicy
from .tebd import EvolutionSchedule, Stage, energy, ground_state_search, initial_state

__version__ = "0.1.0"

__all__ = ["Explicit", "GaussianRandom", "Sinusoidal", "SpinChainModel", "Staggered", "Uniform",
           "build_field", "build_gates", "sigma_along_axis", "MatrixProductState",
           "TruncationPolicy", "EvolutionSchedule", "Stage", "energy", "ground_state_search",
           "initial_state"]
