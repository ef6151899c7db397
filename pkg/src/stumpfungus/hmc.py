"""Hamiltonian Monte Carlo with leapfrog integration and dual averaging.

Plain HMC: Gaussian momentum, kick-drift-kick leapfrog, Metropolis
correction.  Step size is adapted toward a target acceptance rate during
burn-in (Nesterov dual averaging) and frozen afterwards.  Chains are
deterministic functions of (model, config).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import backend


class AdaptationError(RuntimeError):
    """Every burn-in proposal diverged; the step size cannot be adapted."""


@dataclass(frozen=True)
class HmcConfig:
    leapfrog_steps: int = 10
    initial_step_size: float = 0.1
    burn_in: int = 1000
    draws: int = 5000
    seed: int = 0
    target_accept: float = 0.8

    def __post_init__(self):
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if self.initial_step_size <= 0:
            raise ValueError("initial_step_size must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    def to_dict(self):
        return {
            "leapfrog_steps": self.leapfrog_steps,
            "initial_step_size": self.initial_step_size,
            "burn_in": self.burn_in,
            "draws": self.draws,
            "seed": self.seed,
            "target_accept": self.target_accept,
        }


@dataclass
class PosteriorSamples:
    """Post-burn-in draws in constrained coordinates."""

    names: tuple
    matrix: np.ndarray  # (draws, total_dim)
    accept_rate: float
    wall_time_seconds: float
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.names = tuple(self.names)
        self._index = {n: i for i, n in enumerate(self.names)}

    @property
    def draws(self):
        return self.matrix.shape[0]

    def column(self, name):
        try:
            return self.matrix[:, self._index[name]]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def columns(self, names):
        return self.matrix[:, [self._index[n] for n in names]]


def leapfrog(model, q, p, step, steps):
    """Run ``steps`` leapfrog steps; returns (q', p', diverged).

    Deterministic and time-reversible: negating the returned momentum and
    integrating again recovers the start point.
    """
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    lp, g = model.log_density_and_gradient(q)
    if not (np.isfinite(lp) and np.all(np.isfinite(g))):
        return q, p, True
    for _ in range(steps):
        p += 0.5 * step * g
        q += step * p
        lp, g = model.log_density_and_gradient(q)
        if not (np.isfinite(lp) and np.all(np.isfinite(g))):
            return q, p, True
        p += 0.5 * step * g
    return q, p, False


def hmc_step(model, q, step, steps, rng, leap=None):
    """One HMC transition from q; returns (q_next, accepted, accept_prob)."""
    if leap is None:
        leap = backend.get("leapfrog_steps")
    lp0, g0 = model.log_density_and_gradient(q)
    p0 = rng.standard_normal(q.shape[0])
    q1, p1, lp1, diverged = leap(model.logp_grad, q, p0, g0, step, steps)
    if diverged:
        rng.random()  # keep the stream aligned with the accept branch
        return q, False, 0.0
    d_h = (lp1 - 0.5 * float(p1 @ p1)) - (lp0 - 0.5 * float(p0 @ p0))
    accept_prob = 1.0 if d_h >= 0 else math.exp(d_h)
    if rng.random() < accept_prob:
        return q1, True, accept_prob
    return q, False, accept_prob


def run_chain(model, config):
    """Sample ``config.draws`` post-burn-in draws from ``model``.

    Starts at the unconstrained origin.  The leapfrog count is jittered
    uniformly in {ceil(L/2) .. L} each iteration.  Identical (model, config)
    pairs produce bit-identical output.
    """
    rng = np.random.default_rng(config.seed)
    d = model.space.total_dim
    q = np.zeros(d)
    lp0 = model.log_density(q)
    if not np.isfinite(lp0):
        raise ValueError(
            f"model {model.model_id!r}: log density not finite at the origin"
        )

    l_max = config.leapfrog_steps
    l_min = max(1, math.ceil(l_max / 2))
    step = config.initial_step_size
    leap = backend.get("leapfrog_steps")

    # dual averaging state (Hoffman & Gelman defaults)
    mu = math.log(10.0 * config.initial_step_size)
    log_step = math.log(config.initial_step_size)
    log_step_bar = 0.0
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    t_start = time.perf_counter()

    any_nondivergent = False
    for m in range(1, config.burn_in + 1):
        steps = int(rng.integers(l_min, l_max + 1))
        q, accepted, accept_prob = hmc_step(model, q, step, steps, rng, leap)
        if accept_prob > 0.0 or accepted:
            any_nondivergent = True
        eta = 1.0 / (m + t0)
        h_bar = (1.0 - eta) * h_bar + eta * (config.target_accept - accept_prob)
        log_step = mu - math.sqrt(m) / gamma * h_bar
        w = m ** (-kappa)
        log_step_bar = w * log_step + (1.0 - w) * log_step_bar
        step = math.exp(log_step)
    if config.burn_in > 0:
        if not any_nondivergent:
            raise AdaptationError(
                f"model {model.model_id!r}: every burn-in proposal diverged; "
                "cannot adapt the step size"
            )
        step = math.exp(log_step_bar)

    out = np.empty((config.draws, d))
    n_accept = 0
    for i in range(config.draws):
        steps = int(rng.integers(l_min, l_max + 1))
        q, accepted, _ = hmc_step(model, q, step, steps, rng, leap)
        n_accept += accepted
        out[i] = q

    wall = time.perf_counter() - t_start

    constrained = model.space.to_constrained(out)
    return PosteriorSamples(
        names=model.space.column_names(),
        matrix=constrained,
        accept_rate=n_accept / config.draws,
        wall_time_seconds=wall,
    )
