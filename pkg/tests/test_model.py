"""The log-density contract and the finite-difference gradient checker."""
import numpy as np
import pytest

from stumpfungus.model import GradientCheckError, Model, check_gradient
from stumpfungus.space import ParameterSpace, Transform


def _quadratic_model(bug=0.0):
    # logp = -0.5 (v - c)' A (v - c); gradient -A (v - c)  [TRIVIAL]
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([0.3, -0.7])
    space = ParameterSpace([("v", 2, Transform.IDENTITY)])

    def logp_grad(v):
        r = v - c
        return -0.5 * float(r @ a @ r), -a @ r + bug

    return Model("quad", space, logp_grad)


def test_accessors_agree():
    m = _quadratic_model()
    v = np.array([1.0, 2.0])
    lp, g = m.log_density_and_gradient(v)
    assert m.log_density(v) == lp
    np.testing.assert_array_equal(m.gradient(v), g)


def test_check_gradient_accepts_correct_gradient():
    m = _quadratic_model()
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert check_gradient(m, rng.normal(size=2)) < 1e-9


def test_check_gradient_flags_wrong_gradient():
    m = _quadratic_model(bug=0.05)
    assert check_gradient(m, np.zeros(2)) > 1e-3


def test_check_gradient_raises_at_non_finite_center():
    space = ParameterSpace([("v", 1, Transform.IDENTITY)])
    m = Model("bad", space, lambda v: (-np.inf, np.zeros(1)))
    with pytest.raises(GradientCheckError):
        check_gradient(m, np.zeros(1))


def test_check_gradient_reports_offending_coordinate():
    space = ParameterSpace([("a", 1, Transform.IDENTITY),
                            ("b", 1, Transform.IDENTITY)])

    def logp_grad(v):
        if v[1] > 0.5:
            return -np.inf, np.zeros(2)
        return 0.0, np.zeros(2)

    m = Model("edge", space, logp_grad)
    with pytest.raises(GradientCheckError) as err:
        check_gradient(m, np.array([0.0, 0.5]), step=1e-1)
    assert err.value.coordinate == 1
