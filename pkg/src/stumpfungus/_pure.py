"""Pure-python log-density kernels; fallback lane for the compiled core.

Every function here has a drop-in twin in ``_kern`` (the Cython extension).
Signatures take the unconstrained vector plus precomputed data summaries and
return ``(log_density, gradient)``.  Small fixed-size models use scalar math
on purpose: for 1-7 parameters the numpy dispatch overhead dominates.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import digamma, gammaln

_LOG_2PI = math.log(2.0 * math.pi)
_LGAMMA4 = math.lgamma(4.0)


def _sigmoid(u):
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _log_sigmoid(u):
    # log sigmoid(u) = -softplus(-u)
    if u >= 0:
        return -math.log1p(math.exp(-u))
    return u - math.log1p(math.exp(u))


def leapfrog_steps(logp_grad, q, p, g, step, steps):
    """Integrate ``steps`` leapfrog steps from (q, p) with starting gradient g.

    Returns ``(q', p', lp', diverged)`` where lp' is the log density at q'.
    Divergence (non-finite log density or gradient) stops the trajectory.
    """
    q = q.copy()
    p = p.copy()
    lp = math.nan
    for _ in range(steps):
        p += 0.5 * step * g
        q += step * p
        lp, g = logp_grad(q)
        if not (np.isfinite(lp) and np.all(np.isfinite(g))):
            return q, p, lp, True
        p += 0.5 * step * g
    return q, p, lp, False


def normal_logp_grad(v, w_total, wy_sum, wyy_sum):
    """Normal model on (mu, log sigma) with flat prior, from weighted summaries.

    ``w_total = sum w_j``, ``wy_sum = sum w_j y_j``, ``wyy_sum = sum w_j y_j^2``;
    unit weights recover plain deterministic conditioning.
    """
    mu = v[0]
    s = v[1]
    inv_var = math.exp(-2.0 * s)
    quad = wyy_sum - 2.0 * mu * wy_sum + mu * mu * w_total
    lp = -w_total * s - 0.5 * w_total * _LOG_2PI - 0.5 * quad * inv_var
    g = np.empty(2)
    g[0] = (wy_sum - mu * w_total) * inv_var
    g[1] = -w_total + quad * inv_var
    return lp, g


def marbles_hier_logp_grad(v, k, m):
    """Hierarchical marbles model: v = (logit p0, logit p_1..p_G).

    ``k`` and ``m`` are per-box blue-draw and total-draw counts.
    """
    G = k.shape[0]
    p0 = _sigmoid(v[0])
    a = 4.0 * p0
    b = 4.0 - a
    if a <= 0.0 or b <= 0.0:
        return -math.inf, np.zeros(v.shape[0])
    lga = math.lgamma(a)
    lgb = math.lgamma(b)
    dga = digamma(a)
    dgb = digamma(b)
    lp = 0.0
    dp0 = 0.0
    g = np.empty(G + 1)
    for i in range(G):
        u = v[1 + i]
        p = _sigmoid(u)
        logp = _log_sigmoid(u)
        logq = _log_sigmoid(-u)
        lp += (_LGAMMA4 - lga - lgb + (a - 1.0 + k[i]) * logp
               + (b - 1.0 + m[i] - k[i]) * logq)
        dp0 += -dga + dgb + logp - logq
        dp = (a - 1.0 + k[i]) / p - (b - 1.0 + m[i] - k[i]) / (1.0 - p)
        g[1 + i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
        lp += logp + logq  # Jacobian of logit p_i
    lp += _log_sigmoid(v[0]) + _log_sigmoid(-v[0])  # Jacobian of logit p0
    g[0] = 4.0 * dp0 * p0 * (1.0 - p0) + (1.0 - 2.0 * p0)
    return lp, g


def marbles_eb_logp_grad(v, k, m, p0):
    """Empirical-Bayes marbles model: p0 fixed, v = logit p_1..p_G."""
    G = k.shape[0]
    a = 4.0 * p0
    b = 4.0 - a
    lga = math.lgamma(a)
    lgb = math.lgamma(b)
    lp = 0.0
    g = np.empty(G)
    for i in range(G):
        u = v[i]
        p = _sigmoid(u)
        logp = _log_sigmoid(u)
        logq = _log_sigmoid(-u)
        lp += (_LGAMMA4 - lga - lgb + (a - 1.0 + k[i]) * logp
               + (b - 1.0 + m[i] - k[i]) * logq + logp + logq)
        dp = (a - 1.0 + k[i]) / p - (b - 1.0 + m[i] - k[i]) / (1.0 - p)
        g[i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def marbles_sf_logp_grad(v, w_total, wlog_sum, wlog1m_sum, k, m):
    """Stump-and-fungus marbles model: v = (logit tau, logit p_new).

    The stochastic-conditioning term enters through weighted sufficient
    statistics of the stump: ``w_total = sum w_j``,
    ``wlog_sum = sum w_j log theta_j``, ``wlog1m_sum = sum w_j log(1-theta_j)``.
    """
    tau = _sigmoid(v[0])
    a = 4.0 * tau
    b = 4.0 - a
    if a <= 0.0 or b <= 0.0:
        return -math.inf, np.zeros(2)
    p = _sigmoid(v[1])
    logp = _log_sigmoid(v[1])
    logq = _log_sigmoid(-v[1])
    c = w_total + 1.0
    lp = (c * (_LGAMMA4 - math.lgamma(a) - math.lgamma(b))
          + (a - 1.0) * (wlog_sum + logp) + (b - 1.0) * (wlog1m_sum + logq)
          + k * logp + (m - k) * logq
          + _log_sigmoid(v[0]) + _log_sigmoid(-v[0]) + logp + logq)
    dtau = 4.0 * (c * (-digamma(a) + digamma(b))
                  + wlog_sum + logp - wlog1m_sum - logq)
    dp = (a - 1.0 + k) / p - (b - 1.0 + m - k) / (1.0 - p)
    g = np.empty(2)
    g[0] = dtau * tau * (1.0 - tau) + (1.0 - 2.0 * tau)
    g[1] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def rats_hier_logp_grad(v, n, y):
    """Hierarchical rats model: v = (log alpha, log beta, logit p_1..p_G)."""
    G = n.shape[0]
    alpha = math.exp(v[0])
    beta = math.exp(v[1])
    if not (0.0 < alpha < math.inf and 0.0 < beta < math.inf):
        return -math.inf, np.zeros(v.shape[0])
    ab = alpha + beta
    lgab = math.lgamma(ab)
    lga = math.lgamma(alpha)
    lgb = math.lgamma(beta)
    lp = -2.5 * math.log(ab) + G * (lgab - lga - lgb)
    sum_logp = 0.0
    sum_logq = 0.0
    g = np.empty(G + 2)
    for i in range(G):
        u = v[2 + i]
        p = _sigmoid(u)
        logp = _log_sigmoid(u)
        logq = _log_sigmoid(-u)
        sum_logp += logp
        sum_logq += logq
        lp += (alpha - 1.0 + y[i]) * logp + (beta - 1.0 + n[i] - y[i]) * logq
        lp += logp + logq  # Jacobian
        dp = (alpha - 1.0 + y[i]) / p - (beta - 1.0 + n[i] - y[i]) / (1.0 - p)
        g[2 + i] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    lp += v[0] + v[1]  # Jacobians of log alpha, log beta
    dgab = digamma(ab)
    dalpha = -2.5 / ab + G * (dgab - digamma(alpha)) + sum_logp
    dbeta = -2.5 / ab + G * (dgab - digamma(beta)) + sum_logq
    g[0] = dalpha * alpha + 1.0
    g[1] = dbeta * beta + 1.0
    return lp, g


def rats_unpooled_logp_grad(v, n, y):
    """Unpooled Beta(1,1)-Binomial model for a single experiment: v = (logit p,)."""
    u = v[0]
    p = _sigmoid(u)
    logp = _log_sigmoid(u)
    logq = _log_sigmoid(-u)
    lp = y * logp + (n - y) * logq + logp + logq
    g = np.empty(1)
    g[0] = y - n * p + 1.0 - 2.0 * p
    return lp, g


def rats_sf_logp_grad(v, w_total, wlog_sum, wlog1m_sum, n, y):
    """Stump-and-fungus rats model: v = (log alpha, log beta, logit p_new)."""
    alpha = math.exp(v[0])
    beta = math.exp(v[1])
    if not (0.0 < alpha < math.inf and 0.0 < beta < math.inf):
        return -math.inf, np.zeros(3)
    ab = alpha + beta
    p = _sigmoid(v[2])
    logp = _log_sigmoid(v[2])
    logq = _log_sigmoid(-v[2])
    c = w_total + 1.0
    lp = (-2.5 * math.log(ab)
          + c * (math.lgamma(ab) - math.lgamma(alpha) - math.lgamma(beta))
          + (alpha - 1.0) * (wlog_sum + logp) + (beta - 1.0) * (wlog1m_sum + logq)
          + y * logp + (n - y) * logq
          + v[0] + v[1] + logp + logq)
    dgab = digamma(ab)
    dalpha = -2.5 / ab + c * (dgab - digamma(alpha)) + wlog_sum + logp
    dbeta = -2.5 / ab + c * (dgab - digamma(beta)) + wlog1m_sum + logq
    dp = (alpha - 1.0 + y) / p - (beta - 1.0 + n - y) / (1.0 - p)
    g = np.empty(3)
    g[0] = dalpha * alpha + 1.0
    g[1] = dbeta * beta + 1.0
    g[2] = dp * p * (1.0 - p) + (1.0 - 2.0 * p)
    return lp, g


def attain_logp_grad(v, x, y, sid, sex, pid, n_sid, n_sex, n_pid,
                     include_hyper, fixed_hypers, stump_samples,
                     stump_weights):
    """Cross-classified attainment model; shared by all three variants.

    ``v`` holds the 18 hyperparameters (when ``include_hyper``) followed by
    one (b0, b1, b2, s) block per group per hierarchy.  ``stump_samples`` /
    ``stump_weights`` add the weighted hyperparameter conditioning terms.
    Non-finite intermediates mark the point as out of support.
    """
    log_2pi = math.log(2.0 * math.pi)
    n = y.shape[0]
    sizes = (n_sid, n_sex, n_pid)
    gidx = (sid, sex, pid)
    if include_hyper:
        hyp = v[:18]
        off = 18
    else:
        hyp = fixed_hypers
        off = 0
    lp = 0.0
    g = np.zeros_like(v)
    with np.errstate(over="ignore", invalid="ignore"):
        for h in range(3):
            gh = sizes[h]
            block = v[off:off + 4 * gh].reshape(gh, 4)
            beta = block[:, :3]
            s = block[:, 3]
            mu_b = hyp[6 * h:6 * h + 3]
            t_b = hyp[6 * h + 3]
            mu_s = hyp[6 * h + 4]
            t_s = hyp[6 * h + 5]
            inv_vb = math.exp(-2.0 * t_b)
            inv_vs = math.exp(-2.0 * t_s)

            # group-parameter priors
            rb = beta - mu_b
            rs = s - mu_s
            lp += (-3.0 * gh * t_b - 1.5 * gh * log_2pi
                   - 0.5 * float(np.sum(rb * rb)) * inv_vb)
            lp += (-gh * t_s - 0.5 * gh * log_2pi
                   - 0.5 * float(np.sum(rs * rs)) * inv_vs)
            dbeta = -rb * inv_vb
            ds = -rs * inv_vs
            if include_hyper:
                g[6 * h:6 * h + 3] += rb.sum(axis=0) * inv_vb
                g[6 * h + 3] += -3.0 * gh + float(np.sum(rb * rb)) * inv_vb
                g[6 * h + 4] += float(rs.sum()) * inv_vs
                g[6 * h + 5] += -gh + float(np.sum(rs * rs)) * inv_vs

            # stochastic conditioning on the stump (hyperparameters only)
            if stump_samples is not None:
                th = stump_samples[:, 4 * h:4 * (h + 1)]
                wh = stump_weights[:, 4 * h:4 * (h + 1)]
                rb_s = th[:, :3] - mu_b
                rs_s = th[:, 3] - mu_s
                wb = wh[:, :3]
                ws = wh[:, 3]
                wb_tot = float(wb.sum())
                ws_tot = float(ws.sum())
                qb = float(np.sum(wb * rb_s * rb_s))
                qs = float(ws @ (rs_s * rs_s))
                lp += -wb_tot * (t_b + 0.5 * log_2pi) - 0.5 * qb * inv_vb
                lp += -ws_tot * (t_s + 0.5 * log_2pi) - 0.5 * qs * inv_vs
                g[6 * h:6 * h + 3] += np.sum(wb * rb_s, axis=0) * inv_vb
                g[6 * h + 3] += -wb_tot + qb * inv_vb
                g[6 * h + 4] += float(ws @ rs_s) * inv_vs
                g[6 * h + 5] += -ws_tot + qs * inv_vs

            # likelihood through this hierarchy
            gi = gidx[h]
            m = np.einsum("ij,ij->i", x, beta[gi])
            sg = s[gi]
            inv_var = np.exp(-2.0 * sg)
            r = y - m
            lp += float(np.sum(-sg)) - 0.5 * n * log_2pi - 0.5 * float(
                np.sum(r * r * inv_var)
            )
            c = r * inv_var
            gblock = g[off:off + 4 * gh].reshape(gh, 4)
            for col in range(3):
                dbeta[:, col] += np.bincount(gi, weights=x[:, col] * c,
                                             minlength=gh)
            ds += np.bincount(gi, weights=(-1.0 + r * r * inv_var),
                              minlength=gh)
            gblock[:, :3] = dbeta
            gblock[:, 3] = ds
            off += 4 * gh
    if not (math.isfinite(lp) and np.all(np.isfinite(g))):
        return -math.inf, np.zeros_like(v)
    return lp, g
