"""Asymptotic invariants of asymptotically hyperbolic initial data.

Mass vector, Hamiltonian charges, hyperbolic center of mass, CMC foliations
near infinity and the first-order evolution of the charges.
"""

from .charges import (Charge, ChargeConvergenceError, IntegrabilityWarning, Kid, MassData,
                      balanced_check, center_of_mass, evaluate_charge, kid, kid_labels,
                      mass_vector, momenta)
from .cmc import CenterLimit, CmcLeaf, CmcSolverError, center_limit, foliate, solve_leaf
from .evolution import EvolutionReport, charge_rate, metric_rate, verify_evolution
from .minkowski import (HyperbolicIsometry, HyperbolicPoint, NotFutureTimelikeError, boost,
                        boost_to_rest)
from .models import (ChartData, DecayError, DecayWarning, DomainError, model_boosted,
                     model_hyperbolic, model_kottler, model_perturbed, model_with_k)

__version__ = "0.1.0"

__all__ = [
    "Charge", "ChargeConvergenceError", "IntegrabilityWarning", "Kid", "MassData",
    "balanced_check", "center_of_mass", "evaluate_charge", "kid", "kid_labels",
    "mass_vector", "momenta",
    "CenterLimit", "CmcLeaf", "CmcSolverError", "center_limit", "foliate", "solve_leaf",
    "EvolutionReport", "charge_rate", "metric_rate", "verify_evolution",
    "HyperbolicIsometry", "HyperbolicPoint", "NotFutureTimelikeError", "boost", "boost_to_rest",
    "ChartData", "DecayError", "DecayWarning", "DomainError", "model_boosted",
    "model_hyperbolic", "model_kottler", "model_perturbed", "model_with_k",
]
