"""Compiled per-row support-function kernels.

Each routine solves ``min q.v`` over one uncertainty set and writes the
minimizing distribution into ``q``.  The batch entry point loops over rows so
the solvers pay a single dispatch per Bellman sweep.
"""
import math

import numpy as np
from numba import njit

CONTAMINATION, TV, KL = 0, 1, 2

KL_ALPHA_LO = 1e-12
KL_REL_WIDTH = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True)
def contamination_row(p, v, R, kmin, q):
    val = 0.0
    for i in range(p.shape[0]):
        q[i] = (1.0 - R) * p[i]
        val += p[i] * v[i]
    q[kmin] += R
    return (1.0 - R) * val + R * v[kmin]


@njit(cache=True)
def tv_row(p, v, R, kmin, order, q):
    # order: states sorted by decreasing v (ties: lowest index first)
    for i in range(p.shape[0]):
        q[i] = p[i]
    eps = min(R, 1.0 - p[kmin])
    if eps > 0.0:
        q[kmin] += eps
        left = eps
        for j in order:
            if left <= 0.0:
                break
            if j == kmin:
                continue
            take = min(left, q[j])
            q[j] -= take
            left -= take
    val = 0.0
    for i in range(p.shape[0]):
        val += q[i] * v[i]
    return val


@njit(cache=True)
def _kl_objective(alpha, R, p, shifted):
    # R*alpha + alpha*log(sum p_i exp(-shifted_i/alpha)); shifted >= 0 on the support
    acc = 0.0
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            acc += p[i] * math.exp(-shifted[i] / alpha)
    return R * alpha + alpha * math.log(acc)


@njit(cache=True)
def _kl_excess(alpha, R, p, shifted):
    # derivative of the dual objective: R - KL(q_alpha || p), increasing in alpha
    z = 0.0
    ev = 0.0
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            w = p[i] * math.exp(-shifted[i] / alpha)
            z += w
            ev += w * shifted[i]
    return R + ev / (z * alpha) + math.log(z)


@njit(cache=True)
def kl_row(p, v, R, vspan, q):
    S = p.shape[0]
    m = np.inf
    top = -np.inf
    for i in range(S):
        if p[i] > 0.0:
            m = min(m, v[i])
            top = max(top, v[i])
    if R == 0.0 or top == m:
        val = 0.0
        for i in range(S):
            q[i] = p[i]
            val += p[i] * v[i]
        return val

    shifted = v - m
    lo = KL_ALPHA_LO
    hi = max(1.0, vspan / R * 10.0)
    tol = KL_REL_WIDTH * (hi - lo)
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = _kl_objective(c, R, p, shifted)
    fd = _kl_objective(d, R, p, shifted)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = _kl_objective(c, R, p, shifted)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = _kl_objective(d, R, p, shifted)
    alpha = 0.5 * (a + b)
    fa = _kl_objective(alpha, R, p, shifted)

    if fa < 0.0:
        # golden section stalls near sqrt(eps) on the flat minimum; finish by
        # bisecting the derivative and keep the feasible (KL <= R) end
        lo_b = a
        hi_b = b
        while _kl_excess(lo_b, R, p, shifted) > 0.0 and lo_b > KL_ALPHA_LO:
            lo_b = max(0.5 * lo_b, KL_ALPHA_LO)
        while _kl_excess(hi_b, R, p, shifted) < 0.0 and hi_b < hi:
            hi_b = min(2.0 * hi_b, hi)
        for _ in range(200):
            mid = 0.5 * (lo_b + hi_b)
            if mid <= lo_b or mid >= hi_b:
                break
            if _kl_excess(mid, R, p, shifted) < 0.0:
                lo_b = mid
            else:
                hi_b = mid
        alpha = hi_b
        fa = min(_kl_objective(hi_b, R, p, shifted), 0.0)

    if fa >= 0.0:
        # optimum at the alpha -> 0 end: mass on argmin v within the support, p-weighted
        tot = 0.0
        for i in range(S):
            if p[i] > 0.0 and v[i] == m:
                q[i] = p[i]
                tot += p[i]
            else:
                q[i] = 0.0
        for i in range(S):
            q[i] /= tot
        return m

    tot = 0.0
    for i in range(S):
        if p[i] > 0.0:
            q[i] = p[i] * math.exp(-shifted[i] / alpha)
            tot += q[i]
        else:
            q[i] = 0.0
    for i in range(S):
        q[i] /= tot
    return m - fa


@njit(cache=True)
def batch_support(kind, P, v, radius, values, Q):
    """Fill ``values[n]`` and ``Q[n, :]`` for every row of ``P`` (shape ``(n, S)``)."""
    kmin = np.argmin(v)
    order = np.argsort(-v, kind="mergesort")
    vspan = v.max() - v.min()
    for n in range(P.shape[0]):
        if kind == CONTAMINATION:
            values[n] = contamination_row(P[n], v, radius[n], kmin, Q[n])
        elif kind == TV:
            values[n] = tv_row(P[n], v, radius[n], kmin, order, Q[n])
        else:
            values[n] = kl_row(P[n], v, radius[n], vspan, Q[n])
