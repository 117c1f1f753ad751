import math

import numpy as np

H = 1e-5


def central_difference(f, arrays, h=H):
    """Finite-difference gradient of scalar ``f()`` w.r.t. each array, perturbed in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            up = f()
            a[idx] = old - h
            down = f()
            a[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-4):
    """max |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros comparable."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def binom_interval(n, p, confidence):
    """Central interval [lo, hi] of Binomial(n, p) holding at least ``confidence`` mass."""
    tail = (1 - confidence) / 2
    pmf = [math.comb(n, k) * p ** k * (1 - p) ** (n - k) for k in range(n + 1)]
    cdf, lo = 0.0, 0
    while cdf + pmf[lo] <= tail:
        cdf += pmf[lo]
        lo += 1
    cdf, hi = 0.0, n
    while cdf + pmf[hi] <= tail:
        cdf += pmf[hi]
        hi -= 1
    return lo, hi
