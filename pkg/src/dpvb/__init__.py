"""Variational posteriors for naive Bayes parameters from Laplace-noised marginal tables."""

from .dpmech import NoisyMarginals, PrivacySpec, laplace_scale, privatize
from .estimators import (BayesEstimator, NaiveEstimator, PosteriorEstimate,
                         VariationalBayesEstimator, bayes_estimate, naive_estimate,
                         squared_error, vb_estimate)
from .nbmodel import ModelParams, ModelShape, TrueMarginals, sample_counts, sample_model_params
from .statdist import RngStream
from .vbengine import FitConfig, PriorSpec, fit

__all__ = [
    "BayesEstimator", "FitConfig", "ModelParams", "ModelShape", "NaiveEstimator",
    "NoisyMarginals", "PosteriorEstimate", "PriorSpec", "PrivacySpec", "RngStream",
    "TrueMarginals", "VariationalBayesEstimator", "bayes_estimate", "fit", "laplace_scale",
    "naive_estimate", "privatize", "sample_counts", "sample_model_params", "squared_error",
    "vb_estimate",
]

__version__ = "0.1.0"
