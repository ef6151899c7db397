"""Hierarchical Bayesian training with posterior compression.

Fit a hierarchical model on training data, compress the group-parameter
posterior into a small weighted sample set, and infer new groups by
stochastically conditioning a complementary model on that set.
"""
from .backend import active_backend, available_backends, use_backend
from .hmc import HmcConfig, PosteriorSamples, run_chain
from .model import Model, check_gradient
from .space import ParameterSpace, Transform
from .stump import (
    HyperSampleSet,
    StumpFungusSpec,
    WeightedSampleSet,
    WeightOptConfig,
    calibrated_max_iters,
    draw_sample_set,
    grad_s_hat,
    log_stoch_cond,
    optimize_weights,
    s_hat_full,
    s_hat_uniform,
)

__version__ = "0.1.0"

__all__ = [
    "HmcConfig",
    "HyperSampleSet",
    "Model",
    "ParameterSpace",
    "PosteriorSamples",
    "StumpFungusSpec",
    "Transform",
    "WeightOptConfig",
    "WeightedSampleSet",
    "active_backend",
    "available_backends",
    "calibrated_max_iters",
    "check_gradient",
    "draw_sample_set",
    "grad_s_hat",
    "log_stoch_cond",
    "optimize_weights",
    "run_chain",
    "s_hat_full",
    "s_hat_uniform",
    "use_backend",
]
