# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled log-density kernels; hot inner loops of the HMC fits.

Drop-in twins of the functions in ``_pure``; see that module for the
contract.  Selection between the two lanes happens in ``backend``.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, lgamma, log, log1p, INFINITY

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453
cdef double LGAMMA4 = lgamma(4.0)


cdef inline double sigmoid(double u) nogil:
    cdef double e
    if u >= 0:
        return 1.0 / (1.0 + exp(-u))
    e = exp(u)
    return e / (1.0 + e)


cdef inline double log_sigmoid(double u) nogil:
    if u >= 0:
        return -log1p(exp(-u))
    return u - log1p(exp(u))


cdef double digamma(double x) nogil:
    # recurrence below 6, then the standard asymptotic series
    cdef double r = 0.0
    cdef double f
    while x < 6.0:
        r -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    return r + log(x) - 0.5 / x - f * (
        1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (
            1.0 / 240.0 - f * (1.0 / 132.0)))))


def leapfrog_steps(logp_grad, cnp.ndarray q0, cnp.ndarray p0,
                   cnp.ndarray g0, double step, Py_ssize_t steps):
    """Integrate ``steps`` leapfrog steps from (q, p) with starting gradient g.

    Returns ``(q', p', lp', diverged)``; see the pure twin for the contract.
    The position/momentum updates run at C speed; only the log-density
    callback crosses into Python.
    """
    q = np.array(q0, dtype=np.float64)
    p = np.array(p0, dtype=np.float64)
    cdef double[::1] qv = q
    cdef double[::1] pv = p
    cdef double[::1] gv = np.ascontiguousarray(g0, dtype=np.float64)
    cdef double half = 0.5 * step
    cdef double lp = 0.0
    cdef Py_ssize_t d = qv.shape[0]
    cdef Py_ssize_t s, i
    cdef bint ok
    for s in range(steps):
        for i in range(d):
            pv[i] = pv[i] + half * gv[i]
        for i in range(d):
            qv[i] = qv[i] + step * pv[i]
        lp, gobj = logp_grad(q)
        gv = gobj
        ok = lp == lp and lp != INFINITY and lp != -INFINITY
        if ok:
            for i in range(d):
                if gv[i] != gv[i] or gv[i] == INFINITY or gv[i] == -INFINITY:
                    ok = False
                    break
        if not ok:
            return q, p, lp, True
        for i in range(d):
            pv[i] = pv[i] + half * gv[i]
    return q, p, lp, False


def normal_logp_grad(double[::1] v, double w_total, double wy_sum,
                     double wyy_sum):
    cdef double mu = v[0]
    cdef double s = v[1]
    cdef double inv_var = exp(-2.0 * s)
    cdef double quad = wyy_sum - 2.0 * mu * wy_sum + mu * mu * w_total
    cdef double lp = -w_total * s - 0.5 * w_total * LOG_2PI - 0.5 * quad * inv_var
    g = np.empty(2)
    cdef double[::1] gv = g
    gv[0] = (wy_sum - mu * w_total) * inv_var
    gv[1] = -w_total + quad * inv_var
    return lp, g


def marbles_hier_logp_grad(double[::1] v, double[::1] k, double[::1] m):
    cdef Py_ssize_t G = k.shape[0]
    cdef double p0 = sigmoid(v[0])
    cdef double a = 4.0 * p0
    cdef double b = 4.0 - a
    g = np.empty(G + 1)
    cdef double[::1] gv = g
    if a <= 0.0 or b <= 0.0:
        g[:] = 0.0
        return -INFINITY, g
    cdef double lga = lgamma(a)
    cdef double lgb = lgamma(b)
    cdef double dga = digamma(a)
    cdef double dgb = digamma(b)
    cdef double lp = 0.0
    cdef double dp0 = 0.0
    cdef double u, p, logp, logq, dp
    cdef Py_ssize_t i
    for i in range(G):
        u = v[1 + i]
        p = sigmoid(u)
        logp = log_sigmoid(u)
        logq = log_sigmoid(-u)
        lp += (LGAMMA4 - lga - lgb + (a - 1.0 + k[i]) * logp
               + (b - 1.0 + m[i] - k[i]) * logq + logp + logq)
        dp0 += -dga + dgb + logp - logq
        dp = (a - 1.0 + k[i]) / p - (b - 1.0 + m[i] - k[i]) / (1.0 - p)
        gv[1 + i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    lp += log_sigmoid(v[0]) + log_sigmoid(-v[0])
    gv[0] = 4.0 * dp0 * p0 * (1.0 - p0) + (1.0 - 2.0 * p0)
    return lp, g


def marbles_eb_logp_grad(double[::1] v, double[::1] k, double[::1] m,
                         double p0):
    cdef Py_ssize_t G = k.shape[0]
    cdef double a = 4.0 * p0
    cdef double b = 4.0 - a
    cdef double lga = lgamma(a)
    cdef double lgb = lgamma(b)
    cdef double lp = 0.0
    g = np.empty(G)
    cdef double[::1] gv = g
    cdef double u, p, logp, logq, dp
    cdef Py_ssize_t i
    for i in range(G):
        u = v[i]
        p = sigmoid(u)
        logp = log_sigmoid(u)
        logq = log_sigmoid(-u)
        lp += (LGAMMA4 - lga - lgb + (a - 1.0 + k[i]) * logp
               + (b - 1.0 + m[i] - k[i]) * logq + logp + logq)
        dp = (a - 1.0 + k[i]) / p - (b - 1.0 + m[i] - k[i]) / (1.0 - p)
        gv[i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def marbles_sf_logp_grad(double[::1] v, double w_total, double wlog_sum,
                         double wlog1m_sum, double k, double m):
    cdef double tau = sigmoid(v[0])
    cdef double a = 4.0 * tau
    cdef double b = 4.0 - a
    g = np.empty(2)
    cdef double[::1] gv = g
    if a <= 0.0 or b <= 0.0:
        g[:] = 0.0
        return -INFINITY, g
    cdef double p = sigmoid(v[1])
    cdef double logp = log_sigmoid(v[1])
    cdef double logq = log_sigmoid(-v[1])
    cdef double c = w_total + 1.0
    cdef double lp = (c * (LGAMMA4 - lgamma(a) - lgamma(b))
                      + (a - 1.0) * (wlog_sum + logp)
                      + (b - 1.0) * (wlog1m_sum + logq)
                      + k * logp + (m - k) * logq
                      + log_sigmoid(v[0]) + log_sigmoid(-v[0]) + logp + logq)
    cdef double dtau = 4.0 * (c * (-digamma(a) + digamma(b))
                              + wlog_sum + logp - wlog1m_sum - logq)
    cdef double dp = (a - 1.0 + k) / p - (b - 1.0 + m - k) / (1.0 - p)
    gv[0] = dtau * tau * (1.0 - tau) + (1.0 - 2.0 * tau)
    gv[1] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def rats_hier_logp_grad(double[::1] v, double[::1] n, double[::1] y):
    cdef Py_ssize_t G = n.shape[0]
    cdef double alpha = exp(v[0])
    cdef double beta = exp(v[1])
    if not (0.0 < alpha < INFINITY and 0.0 < beta < INFINITY):
        return -INFINITY, np.zeros(v.shape[0])
    cdef double ab = alpha + beta
    cdef double lp = (-2.5 * log(ab)
                      + G * (lgamma(ab) - lgamma(alpha) - lgamma(beta)))
    cdef double sum_logp = 0.0
    cdef double sum_logq = 0.0
    g = np.empty(G + 2)
    cdef double[::1] gv = g
    cdef double u, p, logp, logq, dp
    cdef Py_ssize_t i
    for i in range(G):
        u = v[2 + i]
        p = sigmoid(u)
        logp = log_sigmoid(u)
        logq = log_sigmoid(-u)
        sum_logp += logp
        sum_logq += logq
        lp += ((alpha - 1.0 + y[i]) * logp
               + (beta - 1.0 + n[i] - y[i]) * logq + logp + logq)
        dp = (alpha - 1.0 + y[i]) / p - (beta - 1.0 + n[i] - y[i]) / (1.0 - p)
        gv[2 + i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    lp += v[0] + v[1]
    cdef double dgab = digamma(ab)
    cdef double dalpha = -2.5 / ab + G * (dgab - digamma(alpha)) + sum_logp
    cdef double dbeta = -2.5 / ab + G * (dgab - digamma(beta)) + sum_logq
    gv[0] = dalpha * alpha + 1.0
    gv[1] = dbeta * beta + 1.0
    return lp, g


def rats_unpooled_logp_grad(double[::1] v, double n, double y):
    cdef double u = v[0]
    cdef double p = sigmoid(u)
    cdef double logp = log_sigmoid(u)
    cdef double logq = log_sigmoid(-u)
    cdef double lp = y * logp + (n - y) * logq + logp + logq
    g = np.empty(1)
    cdef double[::1] gv = g
    gv[0] = y - n * p + 1.0 - 2.0 * p
    return lp, g


def rats_sf_logp_grad(double[::1] v, double w_total, double wlog_sum,
                      double wlog1m_sum, double n, double y):
    cdef double alpha = exp(v[0])
    cdef double beta = exp(v[1])
    if not (0.0 < alpha < INFINITY and 0.0 < beta < INFINITY):
        return -INFINITY, np.zeros(3)
    cdef double ab = alpha + beta
    cdef double p = sigmoid(v[2])
    cdef double logp = log_sigmoid(v[2])
    cdef double logq = log_sigmoid(-v[2])
    cdef double c = w_total + 1.0
    cdef double lp = (-2.5 * log(ab)
                      + c * (lgamma(ab) - lgamma(alpha) - lgamma(beta))
                      + (alpha - 1.0) * (wlog_sum + logp)
                      + (beta - 1.0) * (wlog1m_sum + logq)
                      + y * logp + (n - y) * logq
                      + v[0] + v[1] + logp + logq)
    cdef double dgab = digamma(ab)
    cdef double dalpha = -2.5 / ab + c * (dgab - digamma(alpha)) + wlog_sum + logp
    cdef double dbeta = -2.5 / ab + c * (dgab - digamma(beta)) + wlog1m_sum + logq
    cdef double dp = (alpha - 1.0 + y) / p - (beta - 1.0 + n - y) / (1.0 - p)
    g = np.empty(3)
    cdef double[::1] gv = g
    gv[0] = dalpha * alpha + 1.0
    gv[1] = dbeta * beta + 1.0
    gv[2] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def attain_logp_grad(double[::1] v, double[:, ::1] x, double[::1] y,
                     cnp.int64_t[::1] sid, cnp.int64_t[::1] sex,
                     cnp.int64_t[::1] pid,
                     Py_ssize_t n_sid, Py_ssize_t n_sex, Py_ssize_t n_pid,
                     bint include_hyper, fixed_hypers,
                     stump_samples, stump_weights):
    """Cross-classified attainment model; see the pure twin for the contract."""
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t dim = v.shape[0]
    g = np.zeros(dim)
    cdef double[::1] gv = g
    cdef double[::1] hyp
    cdef Py_ssize_t off
    if include_hyper:
        hyp = v[:18]
        off = 18
    else:
        hyp = np.ascontiguousarray(fixed_hypers, dtype=np.float64)
        off = 0
    cdef bint has_stump = stump_samples is not None
    cdef double[:, ::1] th
    cdef double[:, ::1] wh
    cdef Py_ssize_t M = 0
    if has_stump:
        th = np.ascontiguousarray(stump_samples, dtype=np.float64)
        wh = np.ascontiguousarray(stump_weights, dtype=np.float64)
        M = th.shape[0]
    cdef cnp.int64_t[::1] gidx
    cdef double lp = 0.0
    cdef Py_ssize_t h, j, c, i, base, gh, gi
    cdef double mub[3]
    cdef double t_b, mu_s, t_s, inv_vb, inv_vs
    cdef double rb, rs, m, sg, iv, r, cval, w, q
    cdef double sum_rb[3]
    cdef double sum_rb2, sum_rs, sum_rs2
    cdef bint ok
    for h in range(3):
        if h == 0:
            gh = n_sid
            gidx = sid
        elif h == 1:
            gh = n_sex
            gidx = sex
        else:
            gh = n_pid
            gidx = pid
        base = off
        for c in range(3):
            mub[c] = hyp[6 * h + c]
            sum_rb[c] = 0.0
        t_b = hyp[6 * h + 3]
        mu_s = hyp[6 * h + 4]
        t_s = hyp[6 * h + 5]
        inv_vb = exp(-2.0 * t_b)
        inv_vs = exp(-2.0 * t_s)

        # group-parameter priors
        sum_rb2 = 0.0
        sum_rs = 0.0
        sum_rs2 = 0.0
        for j in range(gh):
            for c in range(3):
                rb = v[base + 4 * j + c] - mub[c]
                sum_rb[c] += rb
                sum_rb2 += rb * rb
                gv[base + 4 * j + c] = -rb * inv_vb
            rs = v[base + 4 * j + 3] - mu_s
            sum_rs += rs
            sum_rs2 += rs * rs
            gv[base + 4 * j + 3] = -rs * inv_vs
        lp += (-3.0 * gh * t_b - 1.5 * gh * LOG_2PI - 0.5 * sum_rb2 * inv_vb
               - gh * t_s - 0.5 * gh * LOG_2PI - 0.5 * sum_rs2 * inv_vs)
        if include_hyper:
            for c in range(3):
                gv[6 * h + c] += sum_rb[c] * inv_vb
            gv[6 * h + 3] += -3.0 * gh + sum_rb2 * inv_vb
            gv[6 * h + 4] += sum_rs * inv_vs
            gv[6 * h + 5] += -gh + sum_rs2 * inv_vs

        # stochastic conditioning on the stump (hyperparameters only)
        if has_stump:
            for c in range(3):
                sum_rb[c] = 0.0
            sum_rb2 = 0.0
            sum_rs = 0.0
            sum_rs2 = 0.0
            q = 0.0
            for j in range(M):
                for c in range(3):
                    rb = th[j, 4 * h + c] - mub[c]
                    w = wh[j, 4 * h + c]
                    sum_rb[c] += w * rb
                    sum_rb2 += w * rb * rb
                    q += w
                rs = th[j, 4 * h + 3] - mu_s
                w = wh[j, 4 * h + 3]
                sum_rs += w * rs
                sum_rs2 += w * rs * rs
            # q holds the total coefficient weight; scale weight total below
            w = 0.0
            for j in range(M):
                w += wh[j, 4 * h + 3]
            lp += -q * (t_b + 0.5 * LOG_2PI) - 0.5 * sum_rb2 * inv_vb
            lp += -w * (t_s + 0.5 * LOG_2PI) - 0.5 * sum_rs2 * inv_vs
            for c in range(3):
                gv[6 * h + c] += sum_rb[c] * inv_vb
            gv[6 * h + 3] += -q + sum_rb2 * inv_vb
            gv[6 * h + 4] += sum_rs * inv_vs
            gv[6 * h + 5] += -w + sum_rs2 * inv_vs

        # likelihood through this hierarchy
        for i in range(n):
            gi = gidx[i]
            m = (x[i, 0] * v[base + 4 * gi]
                 + x[i, 1] * v[base + 4 * gi + 1]
                 + x[i, 2] * v[base + 4 * gi + 2])
            sg = v[base + 4 * gi + 3]
            iv = exp(-2.0 * sg)
            r = y[i] - m
            lp += -sg - 0.5 * LOG_2PI - 0.5 * r * r * iv
            cval = r * iv
            gv[base + 4 * gi] += x[i, 0] * cval
            gv[base + 4 * gi + 1] += x[i, 1] * cval
            gv[base + 4 * gi + 2] += x[i, 2] * cval
            gv[base + 4 * gi + 3] += -1.0 + r * r * iv
        off += 4 * gh

    ok = lp == lp and lp != INFINITY and lp != -INFINITY
    if ok:
        for i in range(dim):
            if gv[i] != gv[i] or gv[i] == INFINITY or gv[i] == -INFINITY:
                ok = False
                break
    if not ok:
        return -INFINITY, np.zeros(dim)
    return lp, g
