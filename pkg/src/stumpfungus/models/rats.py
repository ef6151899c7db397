"""Tumor-incidence-in-rats case study.

Each experiment reports tumor counts y out of n rats.  Roles: hierarchical
Beta-Binomial with the (alpha + beta)^(-5/2) hyperprior, per-experiment
unpooled Beta(1,1)-Binomial fits, and stump-and-fungus with one experiment
as the new group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .. import backend
from ..model import Model
from ..space import ParameterSpace, Transform
from ..stump import HyperSampleSet, StumpFungusSpec

DEFAULT_COUNT = 71  # 70 training experiments plus one new


@dataclass(frozen=True)
class RatsData:
    """Per-experiment (n rats, y tumor cases) rows."""

    rows: tuple

    def __post_init__(self):
        for n, y in self.rows:
            if n < 1:
                raise ValueError(f"n must be positive, got {n}")
            if not 0 <= y <= n:
                raise ValueError(f"need 0 <= y <= n, got y={y}, n={n}")

    @property
    def count(self):
        return len(self.rows)

    def arrays(self):
        n = np.asarray([r[0] for r in self.rows], dtype=float)
        y = np.asarray([r[1] for r in self.rows], dtype=float)
        return n, y


def generate_data(seed, count=DEFAULT_COUNT, alpha=2.3, beta=13.5,
                  n_range=(10, 52)):
    """Synthetic experiments with marginals shaped like the classic tumor table."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(count):
        n = int(rng.integers(n_range[0], n_range[1]))
        p = rng.beta(alpha, beta)
        y = int(rng.binomial(n, p))
        rows.append((n, y))
    return RatsData(tuple(rows))


def hier_model(data: RatsData):
    """alpha, beta ~ (alpha+beta)^(-5/2); p_i ~ Beta(alpha, beta); Binomial."""
    n, y = data.arrays()
    space = ParameterSpace(
        [("alpha", 1, Transform.LOG_POSITIVE), ("beta", 1, Transform.LOG_POSITIVE)]
        + [(f"p{i}", 1, Transform.LOGIT_UNIT) for i in range(data.count)]
    )
    fn = backend.get("rats_hier_logp_grad")

    def logp_grad(v):
        return fn(v, n, y)

    return Model("rats-hier", space, logp_grad)


def unpooled_model(n, y):
    """Single-experiment Beta(1,1)-Binomial; posterior is Beta(1+y, 1+n-y)."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if not 0 <= y <= max(n, 0):
        raise ValueError(f"need 0 <= y <= n, got y={y}, n={n}")
    space = ParameterSpace([("p", 1, Transform.LOGIT_UNIT)])
    fn = backend.get("rats_unpooled_logp_grad")
    n_f, y_f = float(n), float(y)

    def logp_grad(v):
        return fn(v, n_f, y_f)

    return Model("rats-unpooled", space, logp_grad)


def sf_model(spec: StumpFungusSpec):
    """Stump-and-fungus model over (alpha, beta, p_new) for one experiment."""
    stump = spec.stump
    if stump.per_component:
        raise ValueError("rats uses joint per-sample weights")
    theta = stump.samples[:, 0]
    w = stump.weights
    w_total = float(w.sum())
    wlog = float(w @ np.log(theta))
    wlog1m = float(w @ np.log1p(-theta))
    n_new, y_new = spec.fungus_data
    if not 0 <= y_new <= n_new:
        raise ValueError(f"need 0 <= y <= n, got y={y_new}, n={n_new}")
    space = ParameterSpace([
        ("alpha", 1, Transform.LOG_POSITIVE),
        ("beta", 1, Transform.LOG_POSITIVE),
        ("p_new", 1, Transform.LOGIT_UNIT),
    ])
    fn = backend.get("rats_sf_logp_grad")
    n_f, y_f = float(n_new), float(y_new)

    def logp_grad(v):
        return fn(v, w_total, wlog, wlog1m, n_f, y_f)

    return Model("rats-sf", space, logp_grad)


def group_columns(count):
    return [[f"p{i}"] for i in range(count)]


def hyper_set(posterior):
    """(alpha, beta) draws; the uniform objective form is used downstream."""
    taus = np.column_stack([posterior.column("alpha"), posterior.column("beta")])
    return HyperSampleSet(taus)


_GRID_CACHE = {}


def log_partition(samples, weights, hyper_taus, grid_points=240):
    """log of the integral of exp(weighted conditioning) over (alpha, beta).

    Quadrature on a (log alpha, log beta) grid spanning the hyper draws with
    a wide margin; the (alpha + beta)^(-5/2) hyperprior is included so the
    integral matches the conditioned hyperparameter density.  Returns +inf
    for nonpositive total weight.
    """
    theta = np.asarray(samples, dtype=float)[:, 0]
    w = np.asarray(weights, dtype=float)
    w_total = float(w.sum())
    if w_total <= 0.0:
        return np.inf
    p = float(w @ np.log(theta))
    q = float(w @ np.log1p(-theta))
    logs = np.log(np.asarray(hyper_taus, dtype=float))
    bounds = []
    for col in range(2):
        lo, hi = float(logs[:, col].min()), float(logs[:, col].max())
        span = hi - lo
        bounds.append((lo - 0.5 * span - 2.0, hi + 0.5 * span + 2.0))
    key = (tuple(bounds), grid_points)
    cached = _GRID_CACHE.get(key)
    if cached is None:
        grids = [np.linspace(lo, hi, grid_points) for lo, hi in bounds]
        la, lb = np.meshgrid(grids[0], grids[1], indexing="ij")
        a = np.exp(la)
        b = np.exp(lb)
        cached = (a, b, gammaln(a + b) - gammaln(a) - gammaln(b),
                  # hyperprior plus the log-scale substitution Jacobian
                  -2.5 * np.log(a + b) + la + lb,
                  np.log(grids[0][1] - grids[0][0])
                  + np.log(grids[1][1] - grids[1][0]))
        _GRID_CACHE[key] = cached
    a, b, log_beta_grid, extra, log_area = cached
    s = (a - 1.0) * p + (b - 1.0) * q + w_total * log_beta_grid + extra
    from scipy.special import logsumexp
    return float(logsumexp(s) + log_area)


def kernel(samples, tau):
    """log Beta(theta_j | alpha, beta)."""
    a, b = float(tau[0]), float(tau[1])
    if a <= 0.0 or b <= 0.0:
        return np.full(samples.shape[0], -np.inf)
    theta = samples[:, 0]
    return (gammaln(a + b) - gammaln(a) - gammaln(b)
            + (a - 1.0) * np.log(theta) + (b - 1.0) * np.log1p(-theta))
