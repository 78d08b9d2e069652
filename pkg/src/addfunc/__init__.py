"""Estimation of additive functionals sum_i phi(p_i) of discrete distributions."""

__version__ = "0.1.0"

from .approx import Polynomial, RemezError, remez_best_poly
from .estimators import (ConfigError, EstimateResult, Estimator, EstimatorConfig,
                         InsufficientDataError, estimate)
from .phi import PhiSpec, ProbabilityVector, eval_phi, neg_p_log_p, polynomial, power, theta_true
from .sampling import Histogram, SplitHistograms, distribution_zoo, poissonize_and_split
from .smoothing import SmoothedPhi

__all__ = [
    "ConfigError", "EstimateResult", "Estimator", "EstimatorConfig", "Histogram",
    "InsufficientDataError", "PhiSpec", "Polynomial", "ProbabilityVector", "RemezError",
    "SmoothedPhi", "SplitHistograms", "distribution_zoo", "estimate", "eval_phi",
    "neg_p_log_p", "poissonize_and_split", "polynomial", "power", "remez_best_poly",
    "theta_true",
]
