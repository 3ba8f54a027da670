"""Finite-difference helpers on uniform grids."""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Weights w with sum_k w_k f(x + o_k h) = h**order f^(order)(x) + O(h^p)."""
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    A = np.vander(o, n, increasing=True).T
    b = np.zeros(n)
    b[order] = factorial(order)
    w = np.linalg.solve(A, b)
    w.setflags(write=False)
    return w


def diff_uniform(f: np.ndarray, h: float, order: int = 1, accuracy: int = 4,
                 axis: int = -1) -> np.ndarray:
    """Derivative along ``axis`` of samples on a uniform grid.

    Centered stencils in the interior and one-sided stencils of the same
    formal accuracy near the ends.
    """
    f = np.moveaxis(np.asarray(f), axis, -1)
    n = f.shape[-1]
    half = (order + 1) // 2 + accuracy // 2 - 1
    width = 2 * half + 1
    if n < width + 1:
        raise ValueError(f"need at least {width + 1} points, got {n}")
    out = np.empty(f.shape, dtype=np.result_type(f.dtype, float))
    wc = fd_weights(tuple(range(-half, half + 1)), order)
    acc = np.zeros(f.shape[:-1] + (n - 2 * half,), dtype=out.dtype)
    for k, w in enumerate(wc):
        acc += w * f[..., k:n - 2 * half + k]
    out[..., half:n - half] = acc
    npts = order + accuracy
    for i in range(half):
        wl = fd_weights(tuple(range(-i, npts - i)), order)
        out[..., i] = f[..., :npts] @ wl
        wr = fd_weights(tuple(range(-(npts - 1 - i), i + 1)), order)
        out[..., n - 1 - i] = f[..., n - npts:] @ wr
    return np.moveaxis(out / h**order, -1, axis)


def diff_callable(fun, r, order: int, step=None):
    """4th-order centered derivative of a vectorized callable."""
    r = np.asarray(r, dtype=float)
    if step is None:
        step = 1e-2 * np.sqrt(r * r + 4.0)
    half = (order + 1) // 2 + 1
    offs = tuple(range(-half, half + 1))
    w = fd_weights(offs, order)
    acc = 0.0
    for o, wk in zip(offs, w):
        if wk != 0.0:
            acc = acc + wk * fun(r + o * step)
    return acc / step**order
