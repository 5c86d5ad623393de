"""Compiled kernels. Every loop over pixels writes disjoint outputs, so the
result is independent of the thread count."""

import math

import numpy as np
from numba import njit, prange

_EPS = 2.220446049250313e-16
_MAX_ITERS = 200


@njit(cache=True)
def _wrap_pad(u, kh, kw):
    """P[a, b] = u[(a - kh + 1 + kh//2) % H, (b - kw + 1 + kw//2) % W], so that
    u[(i - p + rh) % H, (j - q + rw) % W] = P[i - p + kh - 1, j - q + kw - 1]."""
    H, W = u.shape
    rh, rw = kh // 2, kw // 2
    P = np.empty((H + kh - 1, W + kw - 1))
    for a in range(H + kh - 1):
        src = (a - kh + 1 + rh) % H
        for b in range(W + kw - 1):
            P[a, b] = u[src, (b - kw + 1 + rw) % W]
    return P


@njit(cache=True, parallel=True)
def conv_direct(u, w):
    H, W = u.shape
    kh, kw = w.shape
    P = _wrap_pad(u, kh, kw)
    out = np.empty_like(u)
    for i in prange(H):
        for j in range(W):
            acc = 0.0
            for p in range(kh):
                for q in range(kw):
                    wt = w[p, q]
                    if wt != 0.0:
                        acc += wt * P[i - p + kh - 1, j - q + kw - 1]
            out[i, j] = acc
    return out


@njit(cache=True, parallel=True)
def conv_separable(u, col, row):
    H, W = u.shape
    kc, kr = col.shape[0], row.shape[0]
    rh = kc // 2
    P = _wrap_pad(u, 1, kr)
    tmp = np.empty_like(u)
    for i in prange(H):
        for j in range(W):
            acc = 0.0
            for q in range(kr):
                acc += row[q] * P[i, j - q + kr - 1]
            tmp[i, j] = acc
    out = np.empty_like(u)
    for i in prange(H):
        acc = np.zeros(W)
        for p in range(kc):
            src = (i - p + rh) % H
            c = col[p]
            for j in range(W):
                acc[j] += c * tmp[src, j]
        out[i, :] = acc
    return out


@njit(cache=True)
def seq_sum(flat):
    total = 0.0
    for i in range(flat.shape[0]):
        total += flat[i]
    return total


@njit(cache=True)
def _dw_phi(x, c, ubar):
    return x + c * (x * (1.0 + x * (-3.0 + 2.0 * x))) - ubar


@njit(cache=True)
def _dw_dphi(x, c):
    return 1.0 + c * (1.0 + x * (-6.0 + 6.0 * x))


@njit(cache=True)
def _dw_root(a, b, fa, fb, c, ubar):
    """Root of the cubic on [a, b], where it is monotone and fa*fb <= 0."""
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa < 0.0:
        neg, pos = a, b
    else:
        neg, pos = b, a
    x = min(max(ubar, a), b)
    best, best_f = x, math.inf
    for _ in range(_MAX_ITERS):
        fx = _dw_phi(x, c, ubar)
        if fx == 0.0:
            return x
        if abs(fx) < best_f:
            best, best_f = x, abs(fx)
        if fx < 0.0:
            neg = x
        else:
            pos = x
        left, right = min(neg, pos), max(neg, pos)
        if right - left <= 2.0 * _EPS * max(abs(left), abs(right)):
            break
        d = _dw_dphi(x, c)
        xn = x - fx / d if d != 0.0 else math.nan
        if not (left < xn < right):
            xn = 0.5 * (left + right)
        if xn == x:
            break
        x = xn
    return best


@njit(cache=True)
def dw_scalar(ubar, c):
    if c == 0.0:
        return ubar
    if _dw_phi(ubar, c, ubar) == 0.0:
        return ubar
    lo = min(0.0, ubar)
    hi = max(1.0, ubar)
    f_lo = _dw_phi(lo, c, ubar)
    f_hi = _dw_phi(hi, c, ubar)
    if c <= 2.0:
        return _dw_root(lo, hi, f_lo, f_hi, c, ubar)
    h = math.sqrt((c - 2.0) / (12.0 * c))
    pts = np.empty(4)
    vals = np.empty(4)
    pts[0], pts[1], pts[2], pts[3] = lo, 0.5 - h, 0.5 + h, hi
    vals[0] = f_lo
    vals[1] = _dw_phi(pts[1], c, ubar)
    vals[2] = _dw_phi(pts[2], c, ubar)
    vals[3] = f_hi
    best = math.nan
    best_d = math.inf
    for k in range(3):
        if vals[k] * vals[k + 1] <= 0.0:
            r = _dw_root(pts[k], pts[k + 1], vals[k], vals[k + 1], c, ubar)
            d = abs(r - ubar)
            if d < best_d:
                best, best_d = r, d
    return best


@njit(cache=True, parallel=True)
def dw_solve(ubar, c):
    flat = ubar.ravel()
    out = np.empty_like(flat)
    for i in prange(flat.shape[0]):
        out[i] = dw_scalar(flat[i], c)
    return out.reshape(ubar.shape)


@njit(cache=True)
def _expit(s):
    # 1 - e/(1+e) rounds once near 1; 1/(1+e) would round twice
    if s >= 0.0:
        e = math.exp(-s)
        return 1.0 - e / (1.0 + e)
    e = math.exp(s)
    return e / (1.0 + e)


@njit(cache=True)
def logit_scalar(ubar, mu, gamma):
    """Solve u + mu*ln(u/(1-u)) = ubar through s = logit(u)."""
    if mu == 0.0:
        return ubar
    # h(s) = expit(s) + mu*s - ubar is increasing with h' >= mu.
    neg = (ubar - 1.0) / mu
    pos = ubar / mu
    s = (ubar - 0.5) / (mu + 0.25)
    s = min(max(s, neg), pos)
    for _ in range(_MAX_ITERS):
        e = _expit(s)
        h = e + mu * s - ubar
        if h == 0.0:
            break
        if h < 0.0:
            neg = s
        else:
            pos = s
        if pos - neg <= 2.0 * _EPS * max(abs(neg), abs(pos)):
            break
        sn = s - h / (e * (1.0 - e) + mu)
        if not (neg < sn < pos):
            sn = 0.5 * (neg + pos)
        if sn == s:
            break
        s = sn
    u = _expit(s)
    return min(max(u, gamma), 1.0 - gamma)


@njit(cache=True, parallel=True)
def logit_solve(ubar, mu, gamma):
    flat = ubar.ravel()
    out = np.empty_like(flat)
    for i in prange(flat.shape[0]):
        out[i] = logit_scalar(flat[i], mu, gamma)
    return out.reshape(ubar.shape)
