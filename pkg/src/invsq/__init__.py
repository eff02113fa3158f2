"""Bound states of Schroedinger operators with inverse-square tails.

Modules: angular (spectrum of the sphere operator), oscillation (zero
counting), exterior (decaying solutions), ladder (the geometric eigenvalue
sequence of the separable d = 3 model), approxefn (zero-mode trial
functions), examples (counterexamples) and cli.
"""

from .errors import (BracketError, ConvergenceError, EigenError, GridError, HypothesisError,
                     IntegrationError, InvsqError, NodeError, QuadratureError, SpecError,
                     ThresholdError)
from .potential import RadialPerturbation, SpherePotential

__version__ = "0.1.0"

__all__ = [
    "BracketError", "ConvergenceError", "EigenError", "GridError", "HypothesisError",
    "IntegrationError", "InvsqError", "NodeError", "QuadratureError", "SpecError",
    "ThresholdError", "RadialPerturbation", "SpherePotential", "__version__",
]
