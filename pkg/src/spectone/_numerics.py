"""Small numerical helpers: finite differences and low-discrepancy sampling."""

import numpy as np
from scipy.stats import qmc

DEFAULT_SEED = 20071107


def central_jacobian(fun, p, h):
    """Central-difference Jacobian of a batched map.

    ``fun`` maps ``(..., n)`` to ``(..., *out)``; the result has shape
    ``(..., *out, n)``.  ``h`` is a scalar or broadcastable to ``p[..., 0]``.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    h = np.asarray(h, dtype=float)
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        step = h[..., None] * e if h.ndim else h * e
        fp = np.asarray(fun(p + step))
        fm = np.asarray(fun(p - step))
        hk = h.reshape(h.shape + (1,) * (fp.ndim - h.ndim)) if h.ndim else h
        cols.append((fp - fm) / (2.0 * hk))
    return np.stack(cols, axis=-1)


def central_partials(fun, p, steps):
    """Central differences with one step per coordinate axis; result ``(..., *out, n)``."""
    p = np.asarray(p, dtype=float)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), p.shape[-1:])
    cols = []
    for k, hk in enumerate(steps):
        e = np.zeros(p.shape[-1])
        e[k] = hk
        cols.append((np.asarray(fun(p + e)) - np.asarray(fun(p - e))) / (2.0 * hk))
    return np.stack(cols, axis=-1)


def halton(n, d, seed=DEFAULT_SEED):
    """``n`` scrambled Halton points in the unit cube ``[0, 1)^d``."""
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    return sampler.random(n)


def box_samples(n, lo, hi, seed=DEFAULT_SEED):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + (hi - lo) * halton(n, lo.size, seed)


def solve_spd(a, b):
    """Solve batched SPD systems ``a x = b`` where ``b`` is ``(..., n)`` or ``(..., n, k)``."""
    if b.ndim == a.ndim - 1:
        return np.linalg.solve(a, b[..., None])[..., 0]
    return np.linalg.solve(a, b)
