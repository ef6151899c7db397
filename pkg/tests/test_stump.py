"""Weighted sample sets, the objective, its gradient, and the optimizer."""
import math

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import beta as beta_dist

from stumpfungus.hmc import PosteriorSamples
from stumpfungus.models import normal
from stumpfungus.stump import (DegenerateSupportError, HyperSampleSet,
                               ModelMismatchError, StumpFungusSpec,
                               WeightOptConfig, WeightedSampleSet,
                               calibrated_max_iters, draw_sample_set,
                               ell_matrix, grad_s_hat, load_stump,
                               log_stoch_cond, optimize_weights, s_hat_full,
                               s_hat_uniform, save_stump)


def _random_instance(rng, per_component=False, m=None, n=None, d=1):
    m = m if m is not None else int(rng.integers(2, 6))
    n = n if n is not None else int(rng.integers(3, 21))
    samples = rng.normal(size=(m, d))
    weights = rng.uniform(0.2, 2.0, size=(m, d) if per_component else m)
    sset = WeightedSampleSet(samples, weights, per_component)
    taus = np.column_stack([rng.normal(size=n), rng.uniform(-1, 0.5, size=n)])
    log_prior = rng.normal(size=n)
    return sset, HyperSampleSet(taus, log_prior)


def _gauss_kernel_joint(samples, tau):
    mu, s = tau[0], tau[1]
    r = samples[:, 0] - mu
    return -s - 0.5 * math.log(2 * math.pi) - 0.5 * r * r * np.exp(-2 * s)


def _gauss_kernel_per_component(samples, tau):
    mu, s = tau[0], tau[1]
    r = samples - mu
    return -s - 0.5 * math.log(2 * math.pi) - 0.5 * r * r * np.exp(-2 * s)


# ---------------------------------------------------------------- containers

def test_weight_shape_validation():
    with pytest.raises(ValueError):
        WeightedSampleSet(np.zeros((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        WeightedSampleSet(np.zeros((3, 2)), np.ones(3), per_component=True)
    with pytest.raises(ValueError):
        WeightedSampleSet(np.array([[np.inf]]), np.ones(1))


def test_with_weights_round_trip():
    sset = WeightedSampleSet(np.zeros((2, 3)), np.ones((2, 3)),
                             per_component=True, meta={"model_id": "x"})
    out = sset.with_weights(np.arange(6.0), extra_meta={"tag": 1})
    assert out.weights.shape == (2, 3)
    assert out.weights[1, 2] == 5.0
    assert out.meta["model_id"] == "x" and out.meta["tag"] == 1


def test_hyper_set_defaults_to_uniform_prior():
    hyper = HyperSampleSet(np.zeros((4, 2)))
    np.testing.assert_array_equal(hyper.log_prior, np.zeros(4))
    with pytest.raises(ValueError):
        HyperSampleSet(np.zeros((4, 2)), np.zeros(3))


def test_spec_rejects_mismatched_model():
    stump = WeightedSampleSet(np.zeros((1, 1)), np.ones(1),
                              meta={"model_id": "rats"})
    with pytest.raises(ModelMismatchError):
        StumpFungusSpec(stump, None, "marbles")


# ------------------------------------------------------------ sample drawing

def _posterior(rng, draws=50):
    return PosteriorSamples(("p0", "p1"), rng.uniform(0.1, 0.9, (draws, 2)),
                            1.0, 0.0)


def test_draw_sample_set_values_come_from_posterior():
    rng = np.random.default_rng(0)
    post = _posterior(rng)
    sset = draw_sample_set(post, [["p0"], ["p1"]], 10, seed=1)
    assert sset.size == 10 and sset.dim == 1
    pool = set(post.matrix.ravel())
    assert all(float(x) in pool for x in sset.samples.ravel())
    np.testing.assert_array_equal(sset.weights, np.ones(10))


def test_draw_sample_set_is_deterministic_per_seed():
    rng = np.random.default_rng(0)
    post = _posterior(rng)
    a = draw_sample_set(post, [["p0"], ["p1"]], 10, seed=5)
    b = draw_sample_set(post, [["p0"], ["p1"]], 10, seed=5)
    c = draw_sample_set(post, [["p0"], ["p1"]], 10, seed=6)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_draw_sample_set_never_reuses_a_pair():
    rng = np.random.default_rng(0)
    post = _posterior(rng, draws=5)
    sset = draw_sample_set(post, [["p0"], ["p1"]], 10, seed=2)
    assert len(set(map(float, sset.samples.ravel()))) == 10


def test_draw_sample_set_rejects_oversized_request():
    rng = np.random.default_rng(0)
    post = _posterior(rng, draws=3)
    with pytest.raises(ValueError):
        draw_sample_set(post, [["p0"], ["p1"]], 7, seed=0)


# ------------------------------------------------------- conditioning density

def test_log_stoch_cond_conjugate_oracle():
    # two samples at theta = 0.3 and 0.7 under Beta(2, 2):
    # log p = 2 * log(6 * 0.3 * 0.7)  [DERIVED: Beta(2,2) density 6 x (1-x)]
    samples = np.array([[0.3], [0.7]])
    sset = WeightedSampleSet(samples, np.ones(2))

    def kernel(s, tau):
        return beta_dist.logpdf(s[:, 0], tau[0], tau[1])

    got = log_stoch_cond(sset, np.array([2.0, 2.0]), kernel)
    assert got == pytest.approx(2.0 * math.log(6.0 * 0.3 * 0.7), abs=1e-12)


def test_log_stoch_cond_weights_scale_linearly():
    sset = WeightedSampleSet(np.array([[0.2]]), np.array([3.0]))

    def kernel(s, tau):
        return beta_dist.logpdf(s[:, 0], tau[0], tau[1])

    one = log_stoch_cond(sset.with_weights([1.0]), np.array([2.0, 2.0]), kernel)
    three = log_stoch_cond(sset, np.array([2.0, 2.0]), kernel)
    assert three == pytest.approx(3.0 * one)


def test_log_stoch_cond_zero_weight_masks_neg_inf():
    sset = WeightedSampleSet(np.array([[0.5], [2.0]]), np.array([1.0, 0.0]))

    def kernel(s, tau):
        return beta_dist.logpdf(s[:, 0], tau[0], tau[1])  # -inf at 2.0

    got = log_stoch_cond(sset, np.array([2.0, 2.0]), kernel)
    assert np.isfinite(got)
    bad = log_stoch_cond(sset.with_weights([1.0, 1.0]),
                         np.array([2.0, 2.0]), kernel)
    assert bad == -np.inf


# ------------------------------------------------------------- the objective

def _naive_s_hat(sset, hyper, kernel):
    # direct transcription: mean log-conditioning minus log of the mean
    # normalizer, both over the hyper draws, times N
    vals = np.array([
        hyper.log_prior[i] + log_stoch_cond(sset, hyper.taus[i], kernel)
        for i in range(hyper.size)
    ])
    n = hyper.size
    return float(vals.sum() - n * (logsumexp(vals)))


def test_s_hat_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        sset, hyper = _random_instance(rng)
        got = s_hat_full(sset, hyper, _gauss_kernel_joint)
        want = _naive_s_hat(sset, hyper, _gauss_kernel_joint)
        assert got == pytest.approx(want, rel=1e-10)


def test_s_hat_at_zero_weights_is_minus_n_log_n():
    # with w = 0 every draw scores log_prior only under a uniform prior:
    # S = -N log N  [DERIVED: logsumexp of N zeros is log N]
    rng = np.random.default_rng(2)
    sset, hyper = _random_instance(rng, n=12)
    hyper = HyperSampleSet(hyper.taus)  # uniform prior
    zero = sset.with_weights(np.zeros(sset.size))
    got = s_hat_uniform(zero, hyper, _gauss_kernel_joint)
    assert got == pytest.approx(-12.0 * math.log(12.0), abs=1e-10)


def test_s_hat_full_equals_uniform_under_constant_prior():
    rng = np.random.default_rng(3)
    for _ in range(20):
        sset, hyper = _random_instance(rng)
        flat = HyperSampleSet(hyper.taus,
                              np.full(hyper.size, float(rng.normal())))
        a = s_hat_full(sset, flat, _gauss_kernel_joint)
        b = s_hat_uniform(sset, flat, _gauss_kernel_joint)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


def test_degenerate_support_raises():
    sset = WeightedSampleSet(np.array([[2.0]]), np.ones(1))
    hyper = HyperSampleSet(np.array([[2.0, 2.0], [3.0, 3.0]]))

    def kernel(s, tau):
        return beta_dist.logpdf(s[:, 0], tau[0], tau[1])

    with pytest.raises(DegenerateSupportError):
        s_hat_uniform(sset, hyper, kernel)


# --------------------------------------------------------------- the gradient

def _fd_grad(sset, hyper, kernel, h=1e-6):
    flat = sset.flat_weights()
    out = np.empty_like(flat)
    for k in range(flat.shape[0]):
        wp = flat.copy()
        wp[k] += h
        wm = flat.copy()
        wm[k] -= h
        fp = s_hat_full(sset.with_weights(wp), hyper, kernel)
        fm = s_hat_full(sset.with_weights(wm), hyper, kernel)
        out[k] = (fp - fm) / (2 * h)
    return out.reshape(sset.weights.shape)


@pytest.mark.parametrize("per_component", [False, True])
def test_grad_s_hat_matches_finite_differences(per_component):
    rng = np.random.default_rng(4 + per_component)
    kernel = (_gauss_kernel_per_component if per_component
              else _gauss_kernel_joint)
    for _ in range(20):
        sset, hyper = _random_instance(rng, per_component,
                                       d=2 if per_component else 1)
        g = grad_s_hat(sset, hyper, kernel)
        fd = _fd_grad(sset, hyper, kernel)
        err = np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g)))
        assert err <= 1e-5


# --------------------------------------------------------------- optimization

def test_optimize_weights_never_below_all_ones():
    rng = np.random.default_rng(6)
    for _ in range(5):
        sset, hyper = _random_instance(rng)
        out = optimize_weights(sset, hyper, _gauss_kernel_joint,
                               WeightOptConfig(max_iters=200))
        assert out.meta["s_hat"] >= out.meta["s_hat_init"] - 1e-12
        got = s_hat_full(out, hyper, _gauss_kernel_joint)
        assert got == pytest.approx(out.meta["s_hat"], rel=1e-10)


def test_optimize_weights_improves_the_objective():
    rng = np.random.default_rng(7)
    sset, hyper = _random_instance(rng, m=5, n=20)
    out = optimize_weights(sset, hyper, _gauss_kernel_joint,
                           WeightOptConfig(max_iters=500))
    assert out.meta["s_hat"] > out.meta["s_hat_init"]
    assert out.meta["opt_iterations"] >= 1


def test_optimize_weights_is_deterministic():
    rng = np.random.default_rng(8)
    sset, hyper = _random_instance(rng)
    cfg = WeightOptConfig(max_iters=300)
    a = optimize_weights(sset, hyper, _gauss_kernel_joint, cfg)
    b = optimize_weights(sset, hyper, _gauss_kernel_joint, cfg)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_optimize_weights_needs_two_hyper_draws():
    sset = WeightedSampleSet(np.zeros((2, 1)), np.ones(2))
    hyper = HyperSampleSet(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        optimize_weights(sset, hyper, _gauss_kernel_joint)


def test_calibrated_budget_within_range_and_deterministic():
    sset = normal.surrogate_sample_set()
    post = PosteriorSamples(
        ("mu", "log_sigma"),
        np.column_stack([np.random.default_rng(0).normal(0.5, 0.3, 400),
                         np.random.default_rng(1).normal(0.1, 0.2, 400)]),
        1.0, 0.0,
    )
    hyper = normal.hyper_set(post)
    cfg = WeightOptConfig(max_iters=400)
    a = calibrated_max_iters(sset, hyper, normal.kernel,
                             normal.log_partition, cfg)
    b = calibrated_max_iters(sset, hyper, normal.kernel,
                             normal.log_partition, cfg)
    assert a == b
    assert 1 <= a <= 400


# ------------------------------------------------------------------ save/load

def test_stump_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    for per_component in (False, True):
        shape = (4, 3) if per_component else (4,)
        sset = WeightedSampleSet(
            rng.normal(size=(4, 3)), rng.uniform(size=shape), per_component,
            meta={"model_id": "attain", "seed": 3, "n_hyper": 100},
        )
        path = tmp_path / f"stump_{per_component}.json"
        save_stump(sset, path)
        back = load_stump(path)
        np.testing.assert_array_equal(back.samples, sset.samples)
        np.testing.assert_array_equal(back.weights, sset.weights)
        assert back.per_component == per_component
        assert back.meta["model_id"] == "attain"
        assert back.meta["seed"] == 3
        assert back.meta["n_hyper"] == 100


def test_ell_matrix_shapes():
    rng = np.random.default_rng(10)
    sset, hyper = _random_instance(rng, per_component=True, m=3, n=7, d=2)
    ell = ell_matrix(sset, hyper, _gauss_kernel_per_component)
    assert ell.shape == (7, 6)
