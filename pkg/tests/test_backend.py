"""Kernel lane selection and compiled/pure parity."""
import numpy as np
import pytest

from stumpfungus import _pure, backend


requires_compiled = pytest.mark.skipif(
    "compiled" not in backend.available_backends(),
    reason="compiled extension not built",
)


@pytest.fixture(autouse=True)
def _restore_backend():
    before = backend.active_backend()
    yield
    backend.use_backend(before)


def test_available_backends_contains_pure():
    assert "pure" in backend.available_backends()


def test_use_backend_rejects_unknown():
    with pytest.raises(backend.BackendError):
        backend.use_backend("gpu")


def test_use_backend_switches_active():
    backend.use_backend("pure")
    assert backend.active_backend() == "pure"
    fn = backend.get("normal_logp_grad")
    assert fn is _pure.normal_logp_grad


@requires_compiled
def test_compiled_lane_resolves_compiled_functions():
    backend.use_backend("compiled")
    fn = backend.get("normal_logp_grad")
    assert fn is not _pure.normal_logp_grad


def _parity_cases():
    rng = np.random.default_rng(0)
    k = rng.integers(0, 5, size=6).astype(float)
    m = k + rng.integers(0, 5, size=6).astype(float)
    n = rng.integers(10, 50, size=8).astype(float)
    y = np.minimum(rng.integers(0, 12, size=8).astype(float), n)
    return [
        ("normal_logp_grad", (10.0, 4.2, 13.7), 2),
        ("marbles_hier_logp_grad", (k, m), 7),
        ("marbles_eb_logp_grad", (k, m, 0.37), 6),
        ("marbles_sf_logp_grad", (9.5, -6.1, -4.2, 3.0, 8.0), 2),
        ("rats_hier_logp_grad", (n, y), 10),
        ("rats_unpooled_logp_grad", (20.0, 5.0), 1),
        ("rats_sf_logp_grad", (9.5, -18.0, -2.0, 20.0, 5.0), 3),
    ]


@requires_compiled
@pytest.mark.parametrize("name,extra,dim", _parity_cases())
def test_kernel_parity_between_lanes(name, extra, dim):
    rng = np.random.default_rng(hash(name) % 2**32)
    pure_fn = getattr(_pure, name)
    backend.use_backend("compiled")
    fast_fn = backend.get(name)
    assert fast_fn is not pure_fn
    for _ in range(20):
        v = rng.normal(scale=1.5, size=dim)
        lp_a, g_a = pure_fn(v, *extra)
        lp_b, g_b = fast_fn(v, *extra)
        assert lp_b == pytest.approx(lp_a, rel=1e-12, abs=1e-12)
        # the compiled lane ships its own digamma; agreement is ~1e-9
        np.testing.assert_allclose(g_b, g_a, rtol=1e-8, atol=1e-9)


@requires_compiled
def test_leapfrog_steps_parity_between_lanes():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])

    def logp_grad(v):
        return -0.5 * float(v @ a @ v), -a @ v

    rng = np.random.default_rng(3)
    backend.use_backend("compiled")
    fast = backend.get("leapfrog_steps")
    for _ in range(10):
        q = rng.normal(size=2)
        p = rng.normal(size=2)
        _, g = logp_grad(q)
        ra = _pure.leapfrog_steps(logp_grad, q, p, g, 0.1, 8)
        rb = fast(logp_grad, q, p, g, 0.1, 8)
        np.testing.assert_array_equal(ra[0], rb[0])
        np.testing.assert_array_equal(ra[1], rb[1])
        assert ra[2] == rb[2]
        assert bool(ra[3]) == bool(rb[3])


def test_leapfrog_steps_reports_divergence():
    def logp_grad(v):
        if abs(v[0]) > 1.0:
            return -np.inf, np.zeros(1)
        return 0.0, np.zeros(1)

    for lane in backend.available_backends():
        backend.use_backend(lane)
        fn = backend.get("leapfrog_steps")
        q = np.zeros(1)
        p = np.array([100.0])
        _, _, _, diverged = fn(logp_grad, q, p, np.zeros(1), 0.1, 5)
        assert diverged


@requires_compiled
def test_attain_kernel_parity_between_lanes():
    from stumpfungus.models import attain

    data = attain.synthesize(2, n_pupils=60, n_pid=5, n_sid=3)
    rng = np.random.default_rng(5)
    stump = rng.normal(size=(4, 12))
    w = rng.uniform(0.2, 1.5, size=(4, 12))
    args = (data.x, data.y, data.sid, data.sex, data.pid,
            data.n_sid, data.n_sex, data.n_pid)
    dim_h = 18 + 4 * (3 + 2 + 5)
    backend.use_backend("compiled")
    fast_fn = backend.get("attain_logp_grad")
    assert fast_fn is not _pure.attain_logp_grad
    cases = [
        (dim_h, True, None, None, None),                      # hierarchical
        (dim_h - 18, False, attain.TRUE_HYPERS, None, None),  # empirical Bayes
        (dim_h, True, None, stump, w),                        # stump-and-fungus
    ]
    for dim, include_hyper, fixed, ss, sw in cases:
        for _ in range(10):
            v = rng.normal(scale=0.4, size=dim)
            lp_a, g_a = _pure.attain_logp_grad(v, *args, include_hyper,
                                               fixed, ss, sw)
            lp_b, g_b = fast_fn(v, *args, include_hyper, fixed, ss, sw)
            assert lp_b == pytest.approx(lp_a, rel=1e-10, abs=1e-9)
            np.testing.assert_allclose(g_b, g_a, rtol=1e-9, atol=1e-10)
