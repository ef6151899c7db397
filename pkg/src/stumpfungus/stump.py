"""Weighted sample sets and the weight-optimization objective.

The stump is a set of M group-parameter draws with weights chosen so that
stochastically conditioning the hyperparameters on the set reproduces their
training posterior.  The objective is estimated over N hyperparameter draws
with the log-sum-exp trick and maximized by gradient ascent with momentum
from the all-ones start.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .io import atomic_write_text


class DegenerateSupportError(RuntimeError):
    """Every hyperparameter draw has -inf conditioning density."""


class OptimizationError(RuntimeError):
    pass


class ModelMismatchError(ValueError):
    pass


@dataclass
class WeightedSampleSet:
    """M group-parameter draws plus weights; the stump.

    ``weights`` has shape (M,) for joint per-sample weighting or (M, d) when
    a separate weight is attached to each sample component.
    """

    samples: np.ndarray          # (M, d), constrained coordinates
    weights: np.ndarray          # (M,) or (M, d)
    per_component: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.samples.shape[0] < 1:
            raise ValueError("sample set must contain at least one row")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        expected = self.samples.shape if self.per_component else (self.samples.shape[0],)
        if self.weights.shape != expected:
            raise ValueError(
                f"weights shape {self.weights.shape} does not match {expected}"
            )

    @property
    def size(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def flat_weights(self):
        return self.weights.ravel()

    def with_weights(self, flat, extra_meta=None):
        w = np.asarray(flat, dtype=float).reshape(self.weights.shape)
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        return WeightedSampleSet(self.samples.copy(), w, self.per_component, meta)


@dataclass
class HyperSampleSet:
    """N hyperparameter draws approximating the training posterior of tau."""

    taus: np.ndarray                 # (N, d_hyper)
    log_prior: np.ndarray = None     # (N,); zeros mean a uniform improper prior

    def __post_init__(self):
        self.taus = np.atleast_2d(np.asarray(self.taus, dtype=float))
        if self.log_prior is None:
            self.log_prior = np.zeros(self.taus.shape[0])
        else:
            self.log_prior = np.asarray(self.log_prior, dtype=float)
        if self.log_prior.shape != (self.taus.shape[0],):
            raise ValueError("log_prior length must match the number of draws")
        if not np.all(np.isfinite(self.taus)):
            raise ValueError("hyperparameter draws must be finite")

    @property
    def size(self):
        return self.taus.shape[0]


@dataclass
class StumpFungusSpec:
    """A stump paired with the new-group observations it conditions."""

    stump: WeightedSampleSet
    fungus_data: object
    model_id: str

    def __post_init__(self):
        stump_model = self.stump.meta.get("model_id")
        if stump_model is not None and stump_model != self.model_id:
            raise ModelMismatchError(
                f"stump was built for model {stump_model!r}, not {self.model_id!r}"
            )


def draw_sample_set(posterior, group_columns, size, seed, model_id=None,
                    per_component=False):
    """Draw ``size`` rows from the mixture of per-group posteriors.

    Each row picks a group uniformly, then one of that group's posterior
    draws uniformly; (group, draw) pairs are not reused.  Initial weights
    are all one.
    """
    groups = [list(cols) for cols in group_columns]
    if not groups:
        raise ValueError("need at least one group")
    d = len(groups[0])
    if any(len(g) != d for g in groups):
        raise ValueError("all groups must have the same parameter dimension")
    n_groups = len(groups)
    n_draws = posterior.draws
    if size < 1:
        raise ValueError("sample set size must be >= 1")
    if size > n_groups * n_draws:
        raise ValueError(
            f"requested {size} samples but only {n_groups * n_draws} distinct "
            "(group, draw) pairs are available"
        )
    rng = np.random.default_rng(seed)
    chosen = []
    seen = set()
    while len(chosen) < size:
        g = int(rng.integers(n_groups))
        t = int(rng.integers(n_draws))
        if (g, t) not in seen:
            seen.add((g, t))
            chosen.append((g, t))
    samples = np.empty((size, d))
    for j, (g, t) in enumerate(chosen):
        samples[j] = posterior.columns(groups[g])[t]
    weights = np.ones((size, d)) if per_component else np.ones(size)
    meta = {"seed": int(seed), "n_hyper": None}
    if model_id is not None:
        meta["model_id"] = model_id
    return WeightedSampleSet(samples, weights, per_component, meta)


def log_stoch_cond(sample_set, tau, kernel):
    """Weighted conditioning log density: sum_j w_j log p(theta_j | tau).

    ``kernel(samples, tau)`` returns per-sample (or per-component) log
    densities matching the shape of the weights.  Zero-weight terms are
    dropped before multiplying, so -inf kernel values under zero weight do
    not poison the sum.
    """
    ell = np.asarray(kernel(sample_set.samples, np.asarray(tau, dtype=float)),
                     dtype=float)
    w = sample_set.weights
    if ell.shape != w.shape:
        raise ValueError(
            f"kernel output shape {ell.shape} does not match weights {w.shape}"
        )
    active = w != 0.0
    if not np.any(active):
        return 0.0
    if np.any(np.isneginf(ell[active])):
        return -np.inf
    return float(np.sum(w[active] * ell[active]))


def ell_matrix(sample_set, hyper, kernel):
    """Conditioning log densities for every hyper draw: shape (N, K).

    K is M for joint weighting and M*d for per-component weighting.
    """
    k_dim = sample_set.flat_weights().shape[0]
    out = np.empty((hyper.size, k_dim))
    for i in range(hyper.size):
        out[i] = np.asarray(
            kernel(sample_set.samples, hyper.taus[i]), dtype=float
        ).ravel()
    return out


def _s_hat(ell, w, log_prior):
    s = log_prior + ell @ w
    if np.all(np.isneginf(s)):
        raise DegenerateSupportError(
            "degenerate support: all hyperparameter draws have -inf density"
        )
    n = s.shape[0]
    return float(np.sum(s) - n * logsumexp(s))


def s_hat_full(sample_set, hyper, kernel):
    """Monte Carlo objective including the hyperprior term."""
    ell = ell_matrix(sample_set, hyper, kernel)
    return _s_hat(ell, sample_set.flat_weights(), hyper.log_prior)


def s_hat_uniform(sample_set, hyper, kernel):
    """Monte Carlo objective under a uniform improper hyperprior."""
    ell = ell_matrix(sample_set, hyper, kernel)
    return _s_hat(ell, sample_set.flat_weights(), 0.0)


def _grad_s_hat(ell, w, log_prior):
    s = log_prior + ell @ w
    if np.all(np.isneginf(s)):
        raise DegenerateSupportError(
            "degenerate support: all hyperparameter draws have -inf density"
        )
    n = s.shape[0]
    z = s - np.max(s)
    soft = np.exp(z)
    soft /= soft.sum()
    return ell.sum(axis=0) - n * (soft @ ell)


def grad_s_hat(sample_set, hyper, kernel):
    """Analytic gradient of the objective with respect to the weights."""
    ell = ell_matrix(sample_set, hyper, kernel)
    g = _grad_s_hat(ell, sample_set.flat_weights(), hyper.log_prior)
    return g.reshape(sample_set.weights.shape)


@dataclass(frozen=True)
class WeightOptConfig:
    """Gradient-ascent-with-momentum settings; None fields scale with N."""

    learning_rate: float = None   # default 1e-3 / N
    momentum: float = 0.9
    max_iters: int = 5000
    grad_tol: float = None        # default 1e-6 * N


def calibrated_max_iters(sample_set, hyper, kernel, log_partition, config=None,
                         check_every=10):
    """Iteration budget that stops the ascent in the matched region.

    The sample-based objective estimates its normalizing constant over the
    same hyperparameter draws it averages over.  That estimate degrades as
    the weights shrink, and the estimator's global maximum is the
    uninformative all-zero weights, so ascent run to convergence walks past
    the well-matched weights and flattens the conditioning.  A weighted set
    that reproduces the hyperparameter posterior is a feature of the ascent
    path, not its end point.

    This replays the ascent dynamics of :func:`optimize_weights` and scores
    every ``check_every``-th iterate with the exact objective
    ``mean_i s(tau_i) - log integral p(tau) exp(s(tau)) dtau``, using the
    model-supplied ``log_partition(samples, weights, hyper_taus)`` for the
    integral.  The exact objective has no degenerate maximum (flattened
    weights spread mass over the whole domain and are penalized), so its
    argmax along the path marks the matched region.

    Returns an integer in [1, config.max_iters] suitable as ``max_iters``
    for :func:`optimize_weights`.
    """
    if config is None:
        config = WeightOptConfig()
    n = hyper.size
    if n < 2:
        raise ValueError("budget calibration needs at least 2 hyper draws")
    lr = config.learning_rate if config.learning_rate is not None else 1e-3 / n
    ell = ell_matrix(sample_set, hyper, kernel)
    if not np.all(np.isfinite(ell)):
        raise DegenerateSupportError(
            "non-finite conditioning density for some (sample, hyper draw) pair"
        )
    log_prior = hyper.log_prior
    taus = hyper.taus
    shape = sample_set.weights.shape

    def true_score(w):
        log_z = log_partition(sample_set.samples, w.reshape(shape), taus)
        if not np.isfinite(log_z):
            return -np.inf
        return float(np.mean(log_prior + ell @ w)) - log_z

    w = np.ones_like(sample_set.flat_weights())
    vel = np.zeros_like(w)
    best_iter = 1
    best_score = true_score(w)
    halvings = 0
    for iters in range(1, config.max_iters + 1):
        g = _grad_s_hat(ell, w, log_prior)
        vel = config.momentum * vel + lr * g
        w_new = w + vel
        if np.all(np.isfinite(w_new)):
            s_new = _s_hat(ell, w_new, log_prior)
        else:
            s_new = np.nan
        if not np.isfinite(s_new):
            halvings += 1
            if halvings > 10:
                raise OptimizationError(
                    "objective stayed non-finite after 10 learning-rate halvings"
                )
            lr *= 0.5
            vel[:] = 0.0
            continue
        w = w_new
        if iters % check_every == 0:
            score = true_score(w)
            if score > best_score:
                best_score = score
                best_iter = iters
    return best_iter


def optimize_weights(sample_set, hyper, kernel, config=None):
    """Ascend the objective over the weights, starting from all ones.

    Returns a new set carrying the weights of the final iterate, so a
    calibrated ``max_iters`` stops exactly where its scoring said to stop
    (momentum can overshoot mid-run, so an intermediate iterate with a
    higher sample objective is not necessarily a better weighting).  If the
    final objective falls below the all-ones value the all-ones weights are
    returned instead.  Non-finite objective values trigger a learning-rate
    halving and a retry from the last finite iterate, up to ten times.
    """
    if config is None:
        config = WeightOptConfig()
    n = hyper.size
    if n < 2:
        raise ValueError("weight optimization needs at least 2 hyper draws")
    lr = config.learning_rate if config.learning_rate is not None else 1e-3 / n
    tol = config.grad_tol if config.grad_tol is not None else 1e-6 * n
    ell = ell_matrix(sample_set, hyper, kernel)
    if not np.all(np.isfinite(ell)):
        raise DegenerateSupportError(
            "non-finite conditioning density for some (sample, hyper draw) pair"
        )
    log_prior = hyper.log_prior

    w = np.ones_like(sample_set.flat_weights())
    s_init = _s_hat(ell, w, log_prior)
    s_cur = s_init
    vel = np.zeros_like(w)
    halvings = 0
    iters = 0
    for iters in range(1, config.max_iters + 1):
        g = _grad_s_hat(ell, w, log_prior)
        if np.max(np.abs(g)) <= tol:
            break
        vel = config.momentum * vel + lr * g
        w_new = w + vel
        if np.all(np.isfinite(w_new)):
            s_new = _s_hat(ell, w_new, log_prior)
        else:
            s_new = np.nan
        if not np.isfinite(s_new):
            halvings += 1
            if halvings > 10:
                raise OptimizationError(
                    "objective stayed non-finite after 10 learning-rate halvings"
                )
            lr *= 0.5
            vel[:] = 0.0
            continue
        w = w_new
        s_cur = s_new
    if s_cur < s_init:
        w = np.ones_like(w)
        s_cur = s_init
    return sample_set.with_weights(
        w,
        extra_meta={
            "n_hyper": n,
            "s_hat": s_cur,
            "s_hat_init": s_init,
            "opt_iterations": iters,
        },
    )


def save_stump(sample_set, path):
    """Write the stump JSON document (atomic; lossless float round-trip)."""
    meta = sample_set.meta
    doc = {
        "model_id": meta.get("model_id"),
        "M": sample_set.size,
        "per_component": sample_set.per_component,
        "samples": [[float(x) for x in row] for row in sample_set.samples],
        "weights": (
            [[float(x) for x in row] for row in sample_set.weights]
            if sample_set.per_component
            else [float(x) for x in sample_set.weights]
        ),
        "meta": {
            "seed": meta.get("seed"),
            "N": meta.get("n_hyper"),
            "created": meta.get("created"),
        },
    }
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_stump(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    samples = np.asarray(doc["samples"], dtype=float)
    weights = np.asarray(doc["weights"], dtype=float)
    meta = {
        "model_id": doc.get("model_id"),
        "seed": doc["meta"].get("seed"),
        "n_hyper": doc["meta"].get("N"),
        "created": doc["meta"].get("created"),
    }
    return WeightedSampleSet(samples, weights, bool(doc["per_component"]), meta)
