"""Ruin probabilities of steady-state Bonus-Malus and doubly stochastic
compound Poisson surplus processes via residue series."""

from .errors import (InadmissibleClaimLaw, InvalidWeights, ModelError, MultipleRootDetected, NoRealRoot,
                     RuinError, SingularSystem, SolverError)
from .model import BonusMalusSystem, DistributionSpec, TransitionMatrix, steady_state, validate
from .roots import RootSet, SearchOptions, locate_roots, rightmost_negative_real_root
from .solver import SeriesSolution, eval_psi, lundberg_bound, solve, solve_series
from .transforms import CharacteristicFunction
from .verify import VerificationReport, residual, simulate_ruin, verify

__version__ = "0.1.0"

__all__ = [
    "BonusMalusSystem", "CharacteristicFunction", "DistributionSpec", "InadmissibleClaimLaw",
    "InvalidWeights", "ModelError", "MultipleRootDetected", "NoRealRoot", "RootSet", "RuinError",
    "SearchOptions", "SeriesSolution", "SingularSystem", "SolverError", "TransitionMatrix",
    "VerificationReport", "eval_psi", "locate_roots", "lundberg_bound", "residual",
    "rightmost_negative_real_root", "simulate_ruin", "solve", "solve_series", "steady_state",
    "validate", "verify",
]
