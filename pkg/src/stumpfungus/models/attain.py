"""Educational-attainment case study: cross-classified linear regression.

Three hierarchies (secondary school, sex, primary school); each group in
each hierarchy carries a coefficient vector over (intercept, CC, VRQ) plus a
log noise scale.  The likelihood multiplies the per-hierarchy normal
densities of the same response, exactly as the generative model is written.
Hyperparameters (6 per hierarchy, 18 in total) have flat priors, so every
coordinate is identity-transformed.

The real Scotland data is not redistributable; a shape-matched synthetic
generator stands in for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import Model
from ..space import ParameterSpace, Transform
from ..stump import HyperSampleSet, StumpFungusSpec, WeightedSampleSet

HIERARCHIES = ("sid", "sex", "pid")
N_HIER = 3
BETA_DIM = 3          # intercept, CC, VRQ
GROUP_DIM = BETA_DIM + 1
HYPER_DIM = 6 * N_HIER

_LOG_2PI = math.log(2.0 * math.pi)

# ground-truth hyperparameters of the synthetic generator, ordered as
# (mu_b0, mu_b1, mu_b2, log_sigma_b, mu_s, log_sigma_s) per hierarchy
TRUE_HYPERS = np.array([
    0.0, 0.4, 0.7, math.log(0.35), 0.0, math.log(0.20),    # sid
    0.2, 0.1, -0.1, math.log(0.25), -0.1, math.log(0.15),  # sex
    -0.1, 0.2, 0.3, math.log(0.30), 0.1, math.log(0.20),   # pid
])


@dataclass(frozen=True)
class AttainData:
    """Pupil rows with predictors, target, and three group indices."""

    x: np.ndarray        # (n, 3): 1, CC, VRQ
    y: np.ndarray        # (n,)
    sid: np.ndarray      # (n,) int
    sex: np.ndarray      # (n,) int
    pid: np.ndarray      # (n,) int
    n_sid: int
    n_sex: int
    n_pid: int

    def __post_init__(self):
        n = self.y.shape[0]
        if self.x.shape != (n, BETA_DIM):
            raise ValueError(f"x must have shape ({n}, {BETA_DIM})")
        for name, idx, bound in (
            ("sid", self.sid, self.n_sid),
            ("sex", self.sex, self.n_sex),
            ("pid", self.pid, self.n_pid),
        ):
            if idx.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            if n and (idx.min() < 0 or idx.max() >= bound):
                raise ValueError(f"{name} index out of range [0, {bound})")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("predictors and targets must be finite")

    @property
    def n_pupils(self):
        return self.y.shape[0]

    def group_sizes(self):
        return (self.n_sid, self.n_sex, self.n_pid)

    def group_indices(self):
        return (self.sid, self.sex, self.pid)

    def to_columns(self):
        return {
            "sid": self.sid,
            "sex": self.sex,
            "pid": self.pid,
            "cc": self.x[:, 1],
            "vrq": self.x[:, 2],
            "attain": self.y,
        }


def from_columns(columns, n_sid=None, n_sex=2, n_pid=None):
    sid = np.asarray(columns["sid"], dtype=np.int64)
    pid = np.asarray(columns["pid"], dtype=np.int64)
    n = sid.shape[0]
    x = np.column_stack([
        np.ones(n),
        np.asarray(columns["cc"], dtype=float),
        np.asarray(columns["vrq"], dtype=float),
    ])
    return AttainData(
        x=x,
        y=np.asarray(columns["attain"], dtype=float),
        sid=sid,
        sex=np.asarray(columns["sex"], dtype=np.int64),
        pid=pid,
        n_sid=n_sid if n_sid is not None else int(sid.max()) + 1,
        n_sex=n_sex,
        n_pid=n_pid if n_pid is not None else int(pid.max()) + 1,
    )


def synthesize(seed, n_pupils=3435, n_pid=148, n_sid=19):
    """Generative draw from the model at the ground-truth hyperparameters.

    Primary schools are partitioned among secondary schools (pid mod n_sid),
    so each school's pupils come from its own feeder primaries.  The target
    is drawn from the normalized product of the per-hierarchy densities.
    """
    rng = np.random.default_rng(seed)
    sizes = (n_sid, 2, n_pid)
    params = []
    for h in range(N_HIER):
        mu_b = TRUE_HYPERS[6 * h:6 * h + 3]
        sb = math.exp(TRUE_HYPERS[6 * h + 3])
        mu_s = TRUE_HYPERS[6 * h + 4]
        ss = math.exp(TRUE_HYPERS[6 * h + 5])
        beta = mu_b + sb * rng.standard_normal((sizes[h], BETA_DIM))
        s = mu_s + ss * rng.standard_normal(sizes[h])
        params.append((beta, s))

    pid = rng.integers(0, n_pid, size=n_pupils)
    sid = pid % n_sid
    sex = rng.integers(0, 2, size=n_pupils)
    x = np.column_stack([
        np.ones(n_pupils),
        rng.standard_normal(n_pupils),
        rng.standard_normal(n_pupils),
    ])
    gidx = (sid, sex, pid)
    prec = np.zeros(n_pupils)
    mean_acc = np.zeros(n_pupils)
    for h in range(N_HIER):
        beta, s = params[h]
        m = np.einsum("ij,ij->i", x, beta[gidx[h]])
        var = np.exp(2.0 * s[gidx[h]])
        prec += 1.0 / var
        mean_acc += m / var
    mean = mean_acc / prec
    y = mean + rng.standard_normal(n_pupils) / np.sqrt(prec)
    return AttainData(x, y, sid, sex, pid, n_sid, 2, n_pid)


def hyper_names():
    out = []
    for hn in HIERARCHIES:
        out.extend(f"{hn}_mu_b{c}" for c in range(BETA_DIM))
        out.extend([f"{hn}_log_sigma_b", f"{hn}_mu_s", f"{hn}_log_sigma_s"])
    return out


def _group_entry_names(h, label):
    hn = HIERARCHIES[h]
    return [f"{hn}{label}_b{c}" for c in range(BETA_DIM)] + [f"{hn}{label}_s"]


def group_columns(h, labels):
    return [_group_entry_names(h, g) for g in labels]


def _space(include_hyper, group_labels):
    entries = []
    if include_hyper:
        entries.extend((n, 1, Transform.IDENTITY) for n in hyper_names())
    for h in range(N_HIER):
        for label in group_labels[h]:
            entries.extend(
                (n, 1, Transform.IDENTITY) for n in _group_entry_names(h, label)
            )
    return ParameterSpace(entries)


def _make_logp_grad(data, include_hyper, fixed_hypers, stump_samples,
                    stump_weights):
    """Bind the backend kernel to one dataset/variant; returns v -> (lp, g)."""
    from .. import backend

    fn = backend.get("attain_logp_grad")
    x = np.ascontiguousarray(data.x)
    y = np.ascontiguousarray(data.y)
    sid = np.ascontiguousarray(data.sid, dtype=np.int64)
    sex = np.ascontiguousarray(data.sex, dtype=np.int64)
    pid = np.ascontiguousarray(data.pid, dtype=np.int64)

    def logp_grad(v):
        return fn(v, x, y, sid, sex, pid, data.n_sid, data.n_sex, data.n_pid,
                  include_hyper, fixed_hypers, stump_samples, stump_weights)

    return logp_grad


def hier_model(data: AttainData):
    """Full cross-classified hierarchical model, flat hyperpriors."""
    labels = [list(range(sz)) for sz in data.group_sizes()]
    space = _space(True, labels)

    return Model("attain-hier", space,
                 _make_logp_grad(data, True, None, None, None))


def eb_model(data: AttainData, fixed_hypers):
    """Empirical Bayes: all 18 hyperparameters pinned to given values."""
    fixed = np.asarray(fixed_hypers, dtype=float)
    if fixed.shape != (HYPER_DIM,):
        raise ValueError(f"fixed_hypers must have length {HYPER_DIM}")
    labels = [list(range(sz)) for sz in data.group_sizes()]
    space = _space(False, labels)

    return Model("attain-eb", space,
                 _make_logp_grad(data, False, fixed, None, None))


def restrict_to_school(data: AttainData, school):
    """One school's pupils with locally relabeled groups.

    Returns (subset data, labels) where ``labels[h]`` maps local group index
    to the original label.  Sex keeps both groups; primary schools are the
    ones feeding the school.
    """
    mask = data.sid == school
    if not np.any(mask):
        raise ValueError(f"no pupils for secondary school {school}")
    pids = np.unique(data.pid[mask])
    pid_map = {int(p): i for i, p in enumerate(pids)}
    local = AttainData(
        x=data.x[mask],
        y=data.y[mask],
        sid=np.zeros(int(mask.sum()), dtype=np.int64),
        sex=data.sex[mask],
        pid=np.asarray([pid_map[int(p)] for p in data.pid[mask]], dtype=np.int64),
        n_sid=1,
        n_sex=2,
        n_pid=len(pids),
    )
    labels = [[int(school)], [0, 1], [int(p) for p in pids]]
    return local, labels


def sf_model(spec: StumpFungusSpec):
    """Stump-and-fungus model for one school's pupils.

    ``spec.fungus_data`` is ``(local_data, labels)`` from
    :func:`restrict_to_school`.  Parameter names keep the original group
    labels so school marginals line up with the hierarchical fit.
    """
    stump = spec.stump
    if not stump.per_component:
        raise ValueError("the attainment stump uses per-component weights")
    if stump.dim != GROUP_DIM * N_HIER:
        raise ValueError(
            f"stump rows must have {GROUP_DIM * N_HIER} components, "
            f"got {stump.dim}"
        )
    local, labels = spec.fungus_data
    space = _space(True, labels)
    samples = np.ascontiguousarray(stump.samples)
    weights = np.ascontiguousarray(stump.weights)
    return Model("attain-sf", space,
                 _make_logp_grad(local, True, None, samples, weights))


def hyper_set(posterior):
    """The 18 hyperparameter columns; uniform improper hyperprior."""
    return HyperSampleSet(posterior.columns(hyper_names()))


def _scale_block_logz(w_tot, c_spread, ugrid):
    """log integral over (mean, log sd) of one Gaussian conditioning block.

    The mean integral is closed-form; the log-sd integral runs over
    ``ugrid``.  ``w_tot``/``c_spread`` are lists with one entry per
    component sharing the sd.  Returns +inf when the integral diverges.
    """
    from scipy.special import logsumexp

    if any(w <= 0.0 for w in w_tot):
        return np.inf
    if sum(w_tot) <= len(w_tot) or sum(c_spread) <= 0.0:
        return np.inf
    f = np.zeros_like(ugrid)
    for w, c in zip(w_tot, c_spread):
        f += (0.5 * (_LOG_2PI + 2.0 * ugrid - math.log(w))
              - w * (0.5 * _LOG_2PI + ugrid)
              - 0.5 * c * np.exp(-2.0 * ugrid))
    return float(logsumexp(f) + np.log(ugrid[1] - ugrid[0]))


def log_partition(samples, weights, hyper_taus, grid_points=801):
    """log of the integral of exp(weighted conditioning) over all 18 hypers.

    The integral factorizes per hierarchy into a coefficient block (three
    means sharing one sd) and a scale block (one mean, one sd); mean
    integrals are closed-form Gaussian, sd integrals run on grids spanning
    the hyper draws with a wide margin.  Returns +inf when any block
    diverges, which marks the weights as degenerate for budget calibration.
    """
    samples = np.asarray(samples, dtype=float)
    weights = np.asarray(weights, dtype=float)
    taus = np.asarray(hyper_taus, dtype=float)

    def ugrid(col):
        lo, hi = float(taus[:, col].min()), float(taus[:, col].max())
        span = hi - lo
        return np.linspace(lo - 0.5 * span - 2.0, hi + 0.5 * span + 2.0,
                           grid_points)

    total = 0.0
    for h in range(N_HIER):
        w_tot, c_spread = [], []
        for c in range(BETA_DIM):
            col = GROUP_DIM * h + c
            w = weights[:, col]
            v = samples[:, col]
            wt = float(w.sum())
            if wt <= 0.0:
                return np.inf
            a = float(w @ v)
            b = float(w @ (v * v))
            w_tot.append(wt)
            c_spread.append(b - a * a / wt)
        total += _scale_block_logz(w_tot, c_spread, ugrid(6 * h + 3))
        col = GROUP_DIM * h + BETA_DIM
        w = weights[:, col]
        v = samples[:, col]
        wt = float(w.sum())
        if wt <= 0.0:
            return np.inf
        a = float(w @ v)
        b = float(w @ (v * v))
        total += _scale_block_logz([wt], [b - a * a / wt], ugrid(6 * h + 5))
        if not np.isfinite(total):
            return np.inf
    return total


def kernel(samples, tau):
    """Per-component log N(theta_jc | mean_c(tau), sd_c(tau)); shape (M, 12)."""
    out = np.empty_like(samples)
    for h in range(N_HIER):
        mu_b = tau[6 * h:6 * h + 3]
        t_b = tau[6 * h + 3]
        mu_s = tau[6 * h + 4]
        t_s = tau[6 * h + 5]
        cols = slice(GROUP_DIM * h, GROUP_DIM * h + BETA_DIM)
        rb = samples[:, cols] - mu_b
        out[:, cols] = (-t_b - 0.5 * _LOG_2PI
                        - 0.5 * rb * rb * math.exp(-2.0 * t_b))
        rs = samples[:, GROUP_DIM * h + BETA_DIM] - mu_s
        out[:, GROUP_DIM * h + BETA_DIM] = (
            -t_s - 0.5 * _LOG_2PI - 0.5 * rs * rs * math.exp(-2.0 * t_s)
        )
    return out


def make_stump(posterior, data, size, seed, model_id="attain"):
    """Draw per-hierarchy sample sets and concatenate them row-wise.

    Row j holds one draw from each hierarchy's group mixture; weights are
    per-component (one per sample coordinate), initialized to one.
    """
    from ..stump import draw_sample_set

    parts = []
    for h, sz in enumerate(data.group_sizes()):
        cols = group_columns(h, range(sz))
        sub_seed = int(np.random.SeedSequence([int(seed), h]).generate_state(1)[0])
        part = draw_sample_set(posterior, cols, size, sub_seed)
        parts.append(part.samples)
    samples = np.hstack(parts)
    return WeightedSampleSet(
        samples,
        np.ones_like(samples),
        per_component=True,
        meta={"seed": int(seed), "n_hyper": None, "model_id": model_id},
    )
