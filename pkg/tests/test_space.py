"""Constraint transforms: round-trips, Jacobians, validation."""
import math

import numpy as np
import pytest

from stumpfungus.space import (DimensionError, Entry, ParameterSpace,
                               Transform, as_vector)


def _mixed_space():
    return ParameterSpace([
        ("loc", 2, Transform.IDENTITY),
        ("scale", 1, Transform.LOG_POSITIVE),
        ("prob", 1, Transform.LOGIT_UNIT),
    ])


def test_total_dim_and_column_names():
    space = _mixed_space()
    assert space.total_dim == 4
    assert space.column_names() == ["loc[0]", "loc[1]", "scale", "prob"]


def test_round_trip_is_identity():
    space = _mixed_space()
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(scale=3.0, size=4)
        x = space.to_constrained(v)
        np.testing.assert_allclose(space.to_unconstrained(x), v, atol=1e-12)


def test_constrained_values_lie_in_domain():
    space = _mixed_space()
    v = np.array([-5.0, 7.0, -3.0, 4.0])
    x = space.to_constrained(v)
    # identity coordinates pass through
    assert x[0] == -5.0 and x[1] == 7.0
    assert x[2] == pytest.approx(math.exp(-3.0))
    assert 0.0 < x[3] < 1.0


def test_log_jacobian_logit_at_zero():
    # sigmoid'(0) = 1/4, so the log-Jacobian is log(1/4)  [DERIVED]
    space = ParameterSpace([("p", 1, Transform.LOGIT_UNIT)])
    assert space.log_jacobian(np.zeros(1)) == pytest.approx(math.log(0.25),
                                                            abs=1e-14)


def test_log_jacobian_log_positive_is_v():
    # d exp(v)/dv = exp(v), so the log-Jacobian is v itself  [TRIVIAL]
    space = ParameterSpace([("s", 1, Transform.LOG_POSITIVE)])
    assert space.log_jacobian(np.array([1.7])) == pytest.approx(1.7)


def test_log_jacobian_matches_finite_difference():
    space = _mixed_space()
    rng = np.random.default_rng(1)
    v = rng.normal(size=4)
    # |det J| via FD of each nonidentity coordinate map
    h = 1e-6
    expected = 0.0
    for k, tf in enumerate([Transform.IDENTITY, Transform.IDENTITY,
                            Transform.LOG_POSITIVE, Transform.LOGIT_UNIT]):
        if tf is Transform.IDENTITY:
            continue
        vp = v.copy()
        vp[k] += h
        vm = v.copy()
        vm[k] -= h
        d = (space.to_constrained(vp)[k] - space.to_constrained(vm)[k]) / (2 * h)
        expected += math.log(abs(d))
    assert space.log_jacobian(v) == pytest.approx(expected, rel=1e-6)


def test_out_of_domain_rejected():
    space = _mixed_space()
    bad_scale = np.array([0.0, 0.0, -1.0, 0.5])
    with pytest.raises(ValueError):
        space.to_unconstrained(bad_scale)
    bad_prob = np.array([0.0, 0.0, 1.0, 1.5])
    with pytest.raises(ValueError):
        space.to_unconstrained(bad_prob)


def test_dimension_mismatch_raises():
    space = _mixed_space()
    with pytest.raises(DimensionError):
        space.to_constrained(np.zeros(3))
    with pytest.raises(DimensionError):
        as_vector(space, np.zeros((2, 2)))


def test_as_vector_rejects_non_finite():
    space = _mixed_space()
    with pytest.raises(ValueError):
        as_vector(space, np.array([0.0, np.nan, 0.0, 0.0]))


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        ParameterSpace([("a", 1, Transform.IDENTITY),
                        ("a", 1, Transform.IDENTITY)])


def test_entry_shape_must_be_positive():
    with pytest.raises(ValueError):
        Entry("a", 0, Transform.IDENTITY)


def test_batched_transform():
    space = _mixed_space()
    rng = np.random.default_rng(2)
    v = rng.normal(size=(7, 4))
    x = space.to_constrained(v)
    assert x.shape == (7, 4)
    for i in range(7):
        np.testing.assert_allclose(x[i], space.to_constrained(v[i]))
