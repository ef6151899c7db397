"""Single-dimensional normal toy model with flat prior on (mu, log sigma).

Bundles the ten observations and the ten predictive-posterior draws used to
illustrate weight optimization; conditioning on the optimized weighted draw
set reproduces the posterior obtained from the original observations.
"""
from __future__ import annotations

import numpy as np

from .. import backend
from ..model import Model
from ..space import ParameterSpace, Transform
from ..stump import HyperSampleSet, WeightedSampleSet

Y_OBSERVED = (-1.33, -0.61, -0.20, 0.34, 0.71, 1.23, 1.45, 1.47, 1.83, 2.05)
Y_SURROGATE = (-2.77, -1.80, -0.71, -0.62, 0.31, 0.38, 0.43, 0.70, 1.66, 2.6)

_SPACE = ParameterSpace([
    ("mu", 1, Transform.IDENTITY),
    ("log_sigma", 1, Transform.IDENTITY),
])


def _weighted_model(model_id, values, weights):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    w_total = float(weights.sum())
    wy = float(weights @ values)
    wyy = float(weights @ (values * values))
    fn = backend.get("normal_logp_grad")

    def logp_grad(v):
        return fn(v, w_total, wy, wyy)

    return Model(model_id, _SPACE, logp_grad)


def model(y=Y_OBSERVED):
    """Deterministic conditioning on observations ``y``."""
    y = np.asarray(y, dtype=float)
    return _weighted_model("normal", y, np.ones(y.shape[0]))


def stoch_model(sample_set: WeightedSampleSet):
    """Stochastic conditioning on a weighted observation set."""
    if sample_set.per_component:
        raise ValueError("the normal toy uses joint per-sample weights")
    return _weighted_model(
        "normal", sample_set.samples[:, 0], sample_set.weights
    )


def toy():
    """Returns (model conditioned on y, y, surrogate draws)."""
    return model(), np.asarray(Y_OBSERVED), np.asarray(Y_SURROGATE)


def surrogate_sample_set():
    """The predictive-posterior draws as an unweighted sample set."""
    samples = np.asarray(Y_SURROGATE, dtype=float)[:, None]
    return WeightedSampleSet(
        samples, np.ones(samples.shape[0]), False, {"model_id": "normal"}
    )


def hyper_set(posterior):
    """(mu, sigma) draws for weight optimization; uniform improper prior."""
    taus = np.column_stack([posterior.column("mu"), posterior.column("log_sigma")])
    return HyperSampleSet(taus)


def kernel(samples, tau):
    """log Normal(theta_j | mu, sigma) with tau = (mu, log_sigma)."""
    mu, s = tau[0], tau[1]
    r = samples[:, 0] - mu
    return -s - 0.5 * np.log(2.0 * np.pi) - 0.5 * r * r * np.exp(-2.0 * s)


def log_partition(samples, weights, hyper_taus, grid_points=2001):
    """log of the integral of exp(weighted conditioning) over (mu, log sigma).

    The mu integral is Gaussian and closed-form; log sigma is integrated on a
    grid spanning the hyper draws with a wide margin.  Returns +inf when the
    integral diverges (total weight <= 1 or nonpositive weighted spread),
    which marks the weights as degenerate for budget calibration.
    """
    theta = np.asarray(samples, dtype=float)[:, 0]
    w = np.asarray(weights, dtype=float)
    w_total = float(w.sum())
    a = float(w @ theta)
    b = float(w @ (theta * theta))
    if w_total <= 1.0:
        return np.inf
    c = b - a * a / w_total
    if c <= 0.0:
        return np.inf
    u = np.asarray(hyper_taus, dtype=float)[:, 1]
    lo, hi = float(u.min()), float(u.max())
    span = hi - lo
    grid = np.linspace(lo - 0.5 * span - 2.0, hi + 0.5 * span + 2.0, grid_points)
    log_2pi = np.log(2.0 * np.pi)
    f = (0.5 * (log_2pi + 2.0 * grid - np.log(w_total))
         - w_total * (0.5 * log_2pi + grid)
         - 0.5 * c * np.exp(-2.0 * grid))
    from scipy.special import logsumexp
    return float(logsumexp(f) + np.log(grid[1] - grid[0]))
