"""Pure-numpy kernels. Same algorithms as the compiled versions, vectorized
over pixels with masks instead of per-pixel early exits."""

import numpy as np

_EPS = np.finfo(float).eps
_MAX_ITERS = 200


def conv_direct(u, w):
    kh, kw = w.shape
    rh, rw = kh // 2, kw // 2
    out = np.zeros_like(u)
    # tap order (row-major) matches the compiled per-pixel accumulation
    for p in range(kh):
        for q in range(kw):
            wt = w[p, q]
            if wt != 0.0:
                out += wt * np.roll(u, (p - rh, q - rw), axis=(0, 1))
    return out


def conv_separable(u, col, row):
    rh, rw = col.shape[0] // 2, row.shape[0] // 2
    tmp = np.zeros_like(u)
    for q in range(row.shape[0]):
        tmp += row[q] * np.roll(u, q - rw, axis=1)
    out = np.zeros_like(u)
    for p in range(col.shape[0]):
        out += col[p] * np.roll(tmp, p - rh, axis=0)
    return out


def seq_sum(flat):
    if flat.size == 0:
        return 0.0
    # add.accumulate is strictly sequential, unlike the pairwise np.sum
    return np.add.accumulate(flat)[-1]


def _bracketed_newton(f, df, neg, pos, x):
    """Safeguarded Newton on arrays. f(neg) < 0 < f(pos) elementwise;
    the bracket may be oriented either way. Returns the best iterate."""
    neg, pos, x = neg.copy(), pos.copy(), x.copy()
    best = x.copy()
    best_f = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITERS):
        if not active.any():
            break
        fx = f(x)
        better = active & (np.abs(fx) < best_f)
        best[better] = x[better]
        best_f[better] = np.abs(fx[better])
        active &= fx != 0.0
        lower = active & (fx < 0.0)
        upper = active & (fx > 0.0)
        neg[lower] = x[lower]
        pos[upper] = x[upper]
        left, right = np.minimum(neg, pos), np.maximum(neg, pos)
        narrow = right - left <= 2.0 * _EPS * np.maximum(np.abs(left), np.abs(right))
        active &= ~narrow
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / d
        bad = ~((left < xn) & (xn < right))
        xn[bad] = 0.5 * (left[bad] + right[bad])
        active &= xn != x
        x = np.where(active, xn, x)
    return best


def _dw_phi(x, c, ubar):
    return x + c * (x * (1.0 + x * (-3.0 + 2.0 * x))) - ubar


def _dw_dphi(x, c):
    return 1.0 + c * (1.0 + x * (-6.0 + 6.0 * x))


def _dw_piece(a, b, c, ubar):
    """Roots on monotone pieces [a, b]; NaN where there is no sign change."""
    fa = _dw_phi(a, c, ubar)
    fb = _dw_phi(b, c, ubar)
    out = np.full(ubar.shape, np.nan)
    ok = fa * fb <= 0.0
    at_a = ok & (fa == 0.0)
    at_b = ok & ~at_a & (fb == 0.0)
    out[at_a] = a[at_a]
    out[at_b] = b[at_b]
    solve = ok & ~at_a & ~at_b
    if solve.any():
        aa, bb, ub = a[solve], b[solve], ubar[solve]
        neg = np.where(fa[solve] < 0.0, aa, bb)
        pos = np.where(fa[solve] < 0.0, bb, aa)
        x0 = np.clip(ub, aa, bb)
        out[solve] = _bracketed_newton(
            lambda x: _dw_phi(x, c, ub), lambda x: _dw_dphi(x, c), neg, pos, x0
        )
    return out


def dw_solve(ubar, c):
    ubar = np.asarray(ubar, dtype=float)
    if c == 0.0:
        return ubar.copy()
    flat = ubar.ravel()
    fixed = _dw_phi(flat, c, flat) == 0.0
    lo = np.minimum(0.0, flat)
    hi = np.maximum(1.0, flat)
    if c <= 2.0:
        out = _dw_piece(lo, hi, c, flat)
    else:
        h = np.sqrt((c - 2.0) / (12.0 * c))
        cuts = [lo, np.full_like(flat, 0.5 - h), np.full_like(flat, 0.5 + h), hi]
        out = np.full_like(flat, np.nan)
        best_d = np.full_like(flat, np.inf)
        for k in range(3):
            r = _dw_piece(cuts[k], cuts[k + 1], c, flat)
            d = np.abs(r - flat)
            take = d < best_d  # NaN compares False; strict keeps the smaller root on ties
            out[take] = r[take]
            best_d[take] = d[take]
    out[fixed] = flat[fixed]
    return out.reshape(ubar.shape)


def _expit(s):
    e = np.exp(-np.abs(s))
    q = e / (1.0 + e)
    return np.where(s >= 0.0, 1.0 - q, q)


def logit_solve(ubar, mu, gamma):
    ubar = np.asarray(ubar, dtype=float)
    if mu == 0.0:
        return ubar.copy()
    flat = ubar.ravel()
    neg = (flat - 1.0) / mu
    pos = flat / mu
    s0 = np.clip((flat - 0.5) / (mu + 0.25), neg, pos)

    def h(s):
        return _expit(s) + mu * s - flat

    def dh(s):
        e = _expit(s)
        return e * (1.0 - e) + mu

    s = _bracketed_newton(h, dh, neg, pos, s0)
    return np.clip(_expit(s), gamma, 1.0 - gamma).reshape(ubar.shape)
