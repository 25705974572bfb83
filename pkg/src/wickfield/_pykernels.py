"""Pure NumPy implementations of the hot kernels.

Selected automatically when the compiled ``_ckernels`` extension is not
available (or when ``WICKFIELD_BACKEND=python``).  Signatures and results
match the compiled versions up to floating-point summation order.
"""
import numpy as np


def sparse_convolve(keys_a, w_a, keys_b, w_b):
    """Convolution of two sparse sequences given as (linear key, weight) lists.

    Keys must come from a linear encoding of frequency vectors so that
    ``key(n + m) = key(n) + key(m)``.  Returns sorted unique keys and the
    accumulated weights.
    """
    keys_a = np.asarray(keys_a, dtype=np.int64)
    keys_b = np.asarray(keys_b, dtype=np.int64)
    if keys_a.size == 0 or keys_b.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    sums = np.add.outer(keys_a, keys_b).ravel()
    prods = np.multiply.outer(np.asarray(w_a, float), np.asarray(w_b, float)).ravel()
    keys, inverse = np.unique(sums, return_inverse=True)
    return keys, np.bincount(inverse.ravel(), weights=prods, minlength=keys.size)


def hermite_stack(x, sigma, jmax):
    """``H_0 .. H_jmax`` at ``x`` with variance ``sigma``, stacked on axis 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty((jmax + 1,) + x.shape)
    out[0] = 1.0
    if jmax >= 1:
        out[1] = x
    for k in range(1, jmax):
        out[k + 1] = x * out[k] - k * sigma * out[k - 1]
    return out


def hermite_eval(x, sigma, j):
    """``H_j(x; sigma)`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if j == 0:
        return np.ones_like(x)
    prev, cur = np.ones_like(x), x.copy()
    for k in range(1, j):
        prev, cur = cur, x * cur - k * sigma * prev
    return cur
