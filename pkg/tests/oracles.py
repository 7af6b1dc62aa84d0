"""Independent brute-force oracles used by the tests."""

import itertools

import numpy as np


def grid_argmin_1d(f, lo, hi, step):
    """Minimize a vectorized scalar function over a uniform grid."""
    ys = np.arange(lo, hi + 0.5 * step, step)
    vals = f(ys)
    i = int(np.argmin(vals))
    return ys[i], vals[i]


def grid_prox(penalty_1d, x, w, lo=None, hi=None, step=1e-4):
    """Coordinatewise prox of a separable penalty by grid search."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.broadcast_to(np.asarray(w, dtype=float), x.shape)
    out = np.empty_like(x)
    for i, (xi, wi) in enumerate(zip(x, w)):
        a = lo if lo is not None else min(-2.0, xi - 1.0)
        b = hi if hi is not None else max(2.0, xi + 1.0)
        out[i], _ = grid_argmin_1d(lambda y: (y - xi) ** 2 / (2 * wi) + penalty_1d(y), a, b, step)
    return out


def prox_objective(penalty_1d, y, x, w):
    return (y - x) ** 2 / (2 * w) + penalty_1d(y)


def l0_patterns(x, w):
    """Best of the keep/zero patterns for 0.5||y - x||^2 + w ||y||_0."""
    x = np.asarray(x, dtype=float)
    best, best_val = None, np.inf
    for mask in itertools.product((0, 1), repeat=x.size):
        m = np.array(mask, dtype=bool)
        y = np.where(m, x, 0.0)
        val = 0.5 * np.sum((y - x) ** 2) + w * m.sum()
        if val < best_val - 1e-15:
            best, best_val = y, val
    return best


def finite_diff_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def lipschitz_ratio_max(grad, pts_a, pts_b):
    """Largest ||grad(a) - grad(b)|| / ||a - b|| over paired samples."""
    best = 0.0
    for a, b in zip(pts_a, pts_b):
        d = np.linalg.norm(a - b)
        if d > 0:
            best = max(best, np.linalg.norm(grad(a) - grad(b)) / d)
    return best
