"""Boxes-with-marbles case study.

Six boxes of four marbles each are filled from a common bag; draws with
replacement are observed and the per-box blue proportion is inferred.
Roles: hierarchical, empirical Bayes (bag proportion fixed), and
stump-and-fungus with one box as the new group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .. import backend
from ..model import Model
from ..space import ParameterSpace, Transform
from ..stump import HyperSampleSet, StumpFungusSpec

N_BOXES = 6
MARBLES_PER_BOX = 4

# default synthetic bag: blue marbles per box out of four
DEFAULT_COMPOSITION = (1, 2, 2, 3, 3, 4)


@dataclass(frozen=True)
class MarblesData:
    """Draw outcomes: (box index, 0/1) pairs."""

    draws: tuple
    n_boxes: int = N_BOXES

    def __post_init__(self):
        for box, outcome in self.draws:
            if not 0 <= box < self.n_boxes:
                raise ValueError(f"box index {box} out of range [0, {self.n_boxes})")
            if outcome not in (0, 1):
                raise ValueError(f"outcome must be 0 or 1, got {outcome}")

    def counts(self):
        """Per-box (blue draws, total draws) as float arrays."""
        k = np.zeros(self.n_boxes)
        m = np.zeros(self.n_boxes)
        for box, outcome in self.draws:
            m[box] += 1
            k[box] += outcome
        return k, m

    def restrict(self, box):
        """Draws of a single box, as a new dataset."""
        return MarblesData(
            tuple(d for d in self.draws if d[0] == box), self.n_boxes
        )

    def drop(self, box):
        """All draws except one box's, with the remaining boxes renumbered.

        Used to train a stump before a held-out box arrives as the new group.
        """
        others = [b for b in range(self.n_boxes) if b != box]
        remap = {b: i for i, b in enumerate(others)}
        return MarblesData(
            tuple((remap[b], o) for b, o in self.draws if b != box),
            self.n_boxes - 1,
        )


def generate_data(seed, draws_per_box=2, composition=DEFAULT_COMPOSITION):
    """Synthetic draws from known box compositions (blue counts out of 4)."""
    rng = np.random.default_rng(seed)
    draws = []
    for box, blue in enumerate(composition):
        p = blue / MARBLES_PER_BOX
        for _ in range(draws_per_box):
            draws.append((box, int(rng.random() < p)))
    return MarblesData(tuple(draws))


def hier_model(data: MarblesData):
    """p0 ~ Uniform(0,1); p_i | p0 ~ Beta(4 p0, 4(1-p0)); draws Bernoulli."""
    k, m = data.counts()
    space = ParameterSpace(
        [("p0", 1, Transform.LOGIT_UNIT)]
        + [(f"p{i + 1}", 1, Transform.LOGIT_UNIT) for i in range(data.n_boxes)]
    )
    fn = backend.get("marbles_hier_logp_grad")

    def logp_grad(v):
        return fn(v, k, m)

    return Model("marbles-hier", space, logp_grad)


def eb_model(data: MarblesData, p0_fixed):
    """Empirical Bayes: the bag proportion is pinned to ``p0_fixed``."""
    if not 0.0 < p0_fixed < 1.0:
        raise ValueError(f"p0_fixed must lie in (0, 1), got {p0_fixed}")
    k, m = data.counts()
    space = ParameterSpace(
        [(f"p{i + 1}", 1, Transform.LOGIT_UNIT) for i in range(data.n_boxes)]
    )
    fn = backend.get("marbles_eb_logp_grad")

    def logp_grad(v):
        return fn(v, k, m, float(p0_fixed))

    return Model("marbles-eb", space, logp_grad)


def sf_model(spec: StumpFungusSpec):
    """Stump-and-fungus model over (tau, p_new) for one box of draws."""
    stump = spec.stump
    if stump.per_component:
        raise ValueError("marbles uses joint per-sample weights")
    theta = stump.samples[:, 0]
    w = stump.weights
    w_total = float(w.sum())
    wlog = float(w @ np.log(theta))
    wlog1m = float(w @ np.log1p(-theta))
    k = float(sum(o for _, o in spec.fungus_data.draws))
    m = float(len(spec.fungus_data.draws))
    space = ParameterSpace([
        ("tau", 1, Transform.LOGIT_UNIT),
        ("p_new", 1, Transform.LOGIT_UNIT),
    ])
    fn = backend.get("marbles_sf_logp_grad")

    def logp_grad(v):
        return fn(v, w_total, wlog, wlog1m, k, m)

    return Model("marbles-sf", space, logp_grad)


def group_columns(n_boxes=N_BOXES):
    return [[f"p{i + 1}"] for i in range(n_boxes)]


def hyper_set(posterior):
    """p0 draws; uniform hyperprior, so no log-prior term."""
    return HyperSampleSet(posterior.column("p0")[:, None])


_GRID_CACHE = {}


def _grid(grid_points):
    if grid_points not in _GRID_CACHE:
        tau = (np.arange(grid_points) + 0.5) / grid_points
        a = 4.0 * tau
        b = 4.0 * (1.0 - tau)
        _GRID_CACHE[grid_points] = (a, b, gammaln(a) + gammaln(b) - gammaln(a + b))
    return _GRID_CACHE[grid_points]


def log_partition(samples, weights, hyper_taus, grid_points=4001):
    """log of the integral of exp(weighted conditioning) over p0 in (0, 1).

    Midpoint quadrature on a uniform grid; the Uniform(0,1) hyperprior has
    density one.  Returns +inf for nonpositive total weight, where the
    integrand blows up at the endpoints.
    """
    theta = np.asarray(samples, dtype=float)[:, 0]
    w = np.asarray(weights, dtype=float)
    w_total = float(w.sum())
    if w_total <= 0.0:
        return np.inf
    p = float(w @ np.log(theta))
    q = float(w @ np.log1p(-theta))
    a, b, log_beta_fn = _grid(grid_points)
    s = (a - 1.0) * p + (b - 1.0) * q - w_total * log_beta_fn
    from scipy.special import logsumexp
    return float(logsumexp(s) - np.log(grid_points))


def kernel(samples, tau):
    """log Beta(theta_j | 4 tau, 4(1 - tau))."""
    t = float(tau[0])
    a = 4.0 * t
    b = 4.0 - a
    theta = samples[:, 0]
    return (gammaln(4.0) - gammaln(a) - gammaln(b)
            + (a - 1.0) * np.log(theta) + (b - 1.0) * np.log1p(-theta))
