"""Blind hierarchical deconvolution of 1-D signals.

Jointly estimates an unknown Gaussian blur width and a non-stationary
Matérn length-scale field by empirical-Bayes MAP optimisation, then
reconstructs the signal from the closed-form Gaussian posterior.
"""
from .covariance import Grid, MaternConfig, build_nonstationary, build_stationary, matern_correlation
from .forward import Dataset, SignalSpec, build_operator, default_signal, relative_mse, simulate
from .hyperpriors import PriorConfig
from .inference import (
    HyperParams,
    Reconstruction,
    conditional_posterior,
    hyper_log_posterior,
    marginal_loglik,
)
from .optimizer import OptConfig, deconvolve, fit_map, fit_stationary_map, maximize

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Grid",
    "HyperParams",
    "MaternConfig",
    "OptConfig",
    "PriorConfig",
    "Reconstruction",
    "SignalSpec",
    "build_nonstationary",
    "build_operator",
    "build_stationary",
    "conditional_posterior",
    "deconvolve",
    "default_signal",
    "fit_map",
    "fit_stationary_map",
    "hyper_log_posterior",
    "marginal_loglik",
    "matern_correlation",
    "maximize",
    "relative_mse",
    "simulate",
]
