"""Fused stepping kernels for the built-in scalar models.

The generic numpy path in :mod:`rbmlmc.schemes` makes ~8 array passes per
time step; these numba kernels fuse a whole path evaluation into a single
pass per step, which is what keeps desk-scale accuracy sweeps at minutes
per grid point on one core.  Kernels exist only for the built-in model /
scheme / functional combinations; everything else (and environments
without numba) falls back to the numpy path, which remains the reference
implementation.  The kernels replicate the numpy expressions operation by
operation, so both paths produce bit-identical results (asserted in the
test suite).

Each kernel returns ``(payoffs, bad_step)`` where ``bad_step`` is the
1-based index of the first step that produced a non-finite state, or 0.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _euler_gbm_max(series, x0, h):
    steps, n = series.shape
    x = np.full(n, x0)
    peak = np.full(n, x0)
    for k in range(steps):
        row = series[k]
        for j in range(n):
            xj = x[j] + h * (x[j] / 50.0) + (x[j] / 5.0) * row[j]
            if not np.isfinite(xj):
                return peak, k + 1
            x[j] = xj
            if xj > peak[j]:
                peak[j] = xj
    return peak, 0


@njit(cache=True)
def _euler_ou_terminal(series, x0, h):
    steps, n = series.shape
    x = np.full(n, x0)
    for k in range(steps):
        row = series[k]
        for j in range(n):
            xj = x[j] + h * (2.0 - x[j]) + 1.0 * row[j]
            if not np.isfinite(xj):
                return x, k + 1
            x[j] = xj
    return x, 0


@njit(cache=True)
def _euler_pos_cir_terminal(series, x0, h):
    steps, n = series.shape
    x = np.full(n, x0)
    for k in range(steps):
        row = series[k]
        for j in range(n):
            base = x[j] if x[j] > 0.0 else 0.0
            xj = x[j] + h * (1.5 - x[j]) + (2.0 * np.sqrt(base)) * row[j]
            if xj < 0.0:
                xj = 0.0
            if not np.isfinite(xj):
                return x, k + 1
            x[j] = xj
    return x, 0


@njit(cache=True)
def _milstein_cir_terminal(series, x0, h):
    steps, n = series.shape
    x = np.full(n, x0)
    sqrt_h = np.sqrt(h)
    for k in range(steps):
        row = series[k]
        for j in range(n):
            floored = x[j] if x[j] > h else h
            root = np.sqrt(floored) + row[j]
            if root < sqrt_h:
                root = sqrt_h
            xj = root * root + (0.5 - x[j]) * h
            if xj < 0.0:
                xj = 0.0
            if not np.isfinite(xj):
                return x, k + 1
            x[j] = xj
    return x, 0


# (model name, scheme, functional) -> kernel
KERNELS = {
    ("gbm", "euler", "max"): _euler_gbm_max,
    ("ou", "euler", "terminal"): _euler_ou_terminal,
    ("cir", "euler-pos", "terminal"): _euler_pos_cir_terminal,
    ("cir", "milstein", "terminal"): _milstein_cir_terminal,
}


def lookup_kernel(model_name: str, scheme: str, functional: str):
    """Fused kernel for this combination, or None to use the numpy path."""
    if not HAVE_NUMBA:
        return None
    return KERNELS.get((model_name, scheme, functional))


@njit(cache=True)
def coeff_pairs_from_bits(bits, q, table_fine, inv_sigma_fine, table_coarse,
                          inv_sigma_coarse, count):
    """Assemble ``count`` q-bit indices and look up both coefficient scales.

    One pass over the bit stream yields the fine coefficient
    ``table_fine[index] * inv_sigma_fine`` and the coarse coefficient from
    the index with its two trailing bits dropped.
    """
    fine = np.empty(count)
    coarse = np.empty(count)
    pos = 0
    for t in range(count):
        m = 0
        for _ in range(q):
            m = (m << 1) | bits[pos]
            pos += 1
        fine[t] = table_fine[m] * inv_sigma_fine
        coarse[t] = table_coarse[m >> 2] * inv_sigma_coarse
    return fine, coarse


@njit(cache=True)
def coeffs_from_bits(bits, q, table, inv_sigma, count):
    """Assemble ``count`` q-bit indices and scale the table values."""
    out = np.empty(count)
    pos = 0
    for t in range(count):
        m = 0
        for _ in range(q):
            m = (m << 1) | bits[pos]
            pos += 1
        out[t] = table[m] * inv_sigma
    return out


@njit(cache=True)
def bridge_increments(coeffs, level):
    """Grid increments from stacked expansion coefficients.

    ``coeffs`` has one row per basis function in resolution-major order
    (row 0 is the linear function, rows ``2**(i-1)..2**i - 1`` the
    resolution-``i`` tents) and one column per path; returns the
    ``(2**level, columns)`` increments of the refined skeleton.
    """
    cols = coeffs.shape[1]
    npts = (1 << level) + 1
    path = np.zeros((npts, cols))
    for col in range(cols):
        path[npts - 1, col] = coeffs[0, col]
    for i in range(1, level + 1):
        stride = 1 << (level - i + 1)
        half = stride >> 1
        scale = 2.0 ** (-(i + 1) / 2.0)
        base = 1 << (i - 1)
        for j in range(base):
            left = j * stride
            mid = left + half
            right = left + stride
            crow = base + j
            for col in range(cols):
                path[mid, col] = 0.5 * (path[left, col] + path[right, col]) + (
                    scale * coeffs[crow, col]
                )
    out = np.empty((npts - 1, cols))
    for k in range(npts - 1):
        for col in range(cols):
            out[k, col] = path[k + 1, col] - path[k, col]
    return out
