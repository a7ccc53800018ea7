"""Coupled fine/coarse driving increments for multilevel path schemes.

A level-``l`` driver produces the vector of ``2**l`` d-dimensional
increments for the fine path together with the ``2**(l-1)`` increments for
the coarse path coupled to it.  Four constructions are provided:

``classic``
    True Brownian increments from a random number generator; the coarse
    increments are exact pairwise sums of the fine ones.

``lc`` (the random-bit wavelet driver)
    A truncated Schauder (Brownian bridge) expansion whose Gaussian
    coefficients are replaced by bit-budgeted discrete normal
    approximations, variance-normalized per resolution.  Coarse
    coefficients reuse the fine coefficient bits with the two least
    significant bits dropped, which makes the coarse increment vector at
    level ``l`` equal in law to the fine increment vector at level
    ``l - 1``.  The per-resolution bit budget is ``2*(l+1-i)`` bits at
    resolution ``i``, totalling ``d*(2**(l+2) - 2)`` bits per draw.

``iid``
    Independent bit-budgeted normal approximations, one per increment,
    all at the budget of a fixed maximal level ``L``; coarse by pairwise
    sums.  Increment laws do not match across levels by design.

``bernoulli``
    Scaled fair-coin increments at a fixed maximal level ``L``, grouped
    per cell for coarser levels; coarse by pairwise sums.

The wavelet driver is evaluated in O(d * 2**l) arithmetic by midpoint
bridge refinement rather than by the O(4**l) double sum over basis
functions: partial sums of the expansion are piecewise linear between
already-built grid points, so appending resolution ``i`` only adds
``peak * coefficient`` at the new midpoints, where the tent peak is
``2**-((i+1)/2)``.  Differencing the finished skeleton yields the
increments.

Batched sampling is pure vector code.  The batch cores use a time-major
layout, arrays of shape ``(steps, n, d)``, so that bridge refinement and
per-step path updates touch contiguous blocks; the single-sample
functions are the ``n = 1`` case.  Within a single sample, bits are
consumed dimension-major (all coefficients of component 0 first,
resolutions in increasing order, shifts in increasing order, most
significant bit first); batched draws consume the stream in per-block
order, a different but fixed interleaving of the same coefficient set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rbnormal import grid_normal_variance, quantile_of_index

__all__ = [
    "SchauderIndex",
    "CoupledIncrements",
    "schauder_increment",
    "bit_budget",
    "total_bits",
    "bridge_skeleton",
    "classic_coupled_increments",
    "lc_coupled_increments",
    "iid_coupled_increments",
    "bernoulli_coupled_increments",
    "lc_increments_from_indices",
    "draw_lc_indices",
]

_MAX_LEVEL = 40


@dataclass(frozen=True)
class SchauderIndex:
    """Resolution/shift index of a Schauder tent function.

    Resolution 0 has the single linear function (j = 1); resolution
    ``i >= 1`` has ``2**(i-1)`` tents, the j-th supported on
    ``[(j-1)*2**-(i-1), j*2**-(i-1)]`` with peak ``2**-((i+1)/2)`` at the
    midpoint.
    """

    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i < 0:
            raise ValueError(f"resolution must be >= 0, got {self.i}")
        n_shifts = 1 if self.i == 0 else 1 << (self.i - 1)
        if not 1 <= self.j <= n_shifts:
            raise ValueError(
                f"shift must be in 1..{n_shifts} at resolution {self.i}, got {self.j}"
            )


@dataclass(frozen=True)
class CoupledIncrements:
    """One coupled draw: fine increments at ``level``, coarse at ``level-1``.

    ``fine`` has shape ``(2**level, d)`` and ``coarse`` has shape
    ``(2**(level-1), d)`` (empty with shape ``(0, d)`` at level 0).
    """

    level: int
    fine: np.ndarray
    coarse: np.ndarray

    @property
    def d(self) -> int:
        return self.fine.shape[1]


def _check_level(level: int) -> int:
    level = int(level)
    if not 0 <= level <= _MAX_LEVEL:
        raise ValueError(f"level must be in 0..{_MAX_LEVEL}, got {level}")
    return level


def schauder_increment(idx: SchauderIndex, k: int, level: int) -> float:
    """Exact increment of a Schauder function over cell ``k`` of the level grid.

    Cell ``k`` (1-based) is ``[(k-1)*2**-level, k*2**-level]``.  Requires
    ``idx.i <= level``; then the cell lies entirely in one slope of one
    tent, so the increment is ``+-2**((i-1)/2) * 2**-level`` for the
    owning tent and zero for all others.  Resolution 0 contributes
    ``2**-level`` for every cell.
    """
    level = _check_level(level)
    if not 1 <= k <= (1 << level):
        raise ValueError(f"cell index must be in 1..2**{level}, got {k}")
    if idx.i > level:
        raise ValueError(
            f"resolution {idx.i} exceeds level {level}; higher resolutions "
            "vanish at the grid nodes"
        )
    if idx.i == 0:
        return 2.0 ** (-level)
    c = k - 1
    owning_tent = c >> (level - idx.i + 1)
    if owning_tent != idx.j - 1:
        return 0.0
    rising_half = ((c >> (level - idx.i)) & 1) == 0
    magnitude = 2.0 ** ((idx.i - 1) / 2.0) * 2.0 ** (-level)
    return magnitude if rising_half else -magnitude


def bit_budget(i: int, level: int) -> int:
    """Bits per coefficient component at resolution ``i`` for a level-``level`` draw."""
    level = _check_level(level)
    if not 0 <= i <= level:
        raise ValueError(f"resolution must be in 0..{level}, got {i}")
    return 2 * (level + 1 - i)


def total_bits(level: int, d: int) -> int:
    """Total bits consumed by one coupled wavelet draw: ``d * (2**(level+2) - 2)``."""
    level = _check_level(level)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return d * ((1 << (level + 2)) - 2)


def _shift_count(i: int) -> int:
    return 1 if i == 0 else 1 << (i - 1)


def bridge_skeleton(level: int, coeffs: list[np.ndarray]) -> np.ndarray:
    """Path values at the ``2**level + 1`` grid points from expansion coefficients.

    ``coeffs[i]`` holds the resolution-``i`` coefficients with shape
    ``(..., 2**(i-1))`` (shape ``(..., 1)`` for i = 0); leading batch axes
    broadcast through.  Built by midpoint refinement: the value at a new
    resolution-``i`` midpoint is the mean of its neighbors plus
    ``2**-((i+1)/2)`` times the coefficient.
    """
    level = _check_level(level)
    if len(coeffs) != level + 1:
        raise ValueError(f"need {level + 1} coefficient blocks, got {len(coeffs)}")
    first = np.asarray(coeffs[0])
    path = np.zeros(first.shape[:-1] + ((1 << level) + 1,))
    path[..., -1] = first[..., 0]
    for i in range(1, level + 1):
        c = np.asarray(coeffs[i])
        shifts = _shift_count(i)
        if c.shape[-1] != shifts:
            raise ValueError(
                f"resolution {i} expects {shifts} coefficients, got {c.shape[-1]}"
            )
        stride = 1 << (level - i + 1)
        half = stride >> 1
        left = path[..., 0 : shifts * stride : stride]
        right = path[..., stride : shifts * stride + 1 : stride]
        path[..., half : shifts * stride : stride] = (
            0.5 * (left + right) + (2.0 ** (-(i + 1) / 2.0)) * c
        )
    return path


def _bridge_time_major(level: int, coeffs: list[np.ndarray]) -> np.ndarray:
    """Midpoint refinement with the grid axis first: ``coeffs[i]`` is
    ``(shifts, n, d)`` and the result ``(2**level + 1, n, d)``.

    Equivalent to :func:`bridge_skeleton` up to layout; the leading grid
    axis makes every slice a contiguous block, which is what the batch
    samplers iterate over.
    """
    first = coeffs[0]
    path = np.zeros(((1 << level) + 1,) + first.shape[1:])
    path[-1] = first[0]
    for i in range(1, level + 1):
        stride = 1 << (level - i + 1)
        half = stride >> 1
        shifts = _shift_count(i)
        left = path[0 : shifts * stride : stride]
        right = path[stride : shifts * stride + 1 : stride]
        path[half : shifts * stride : stride] = (
            0.5 * (left + right) + (2.0 ** (-(i + 1) / 2.0)) * coeffs[i]
        )
    return path


# -- classical Brownian driver ------------------------------------------------


def _pairwise_sums(fine: np.ndarray) -> np.ndarray:
    """Coarse increments: sums of adjacent fine increments (time axis first)."""
    return fine[0::2] + fine[1::2]


def classic_increment_batch(level, src, d=1, n=1):
    """``n`` independent coupled draws of true Brownian increments.

    Returns time-major ``(fine, coarse)`` of shapes ``(2**level, n, d)``
    and ``(2**(level-1), n, d)``.  Consumes ``n * d * 2**level`` random
    numbers; coarse entries are exact pairwise sums of fine ones.
    """
    level = _check_level(level)
    steps = 1 << level
    fine = 2.0 ** (-level / 2.0) * src.draw_std_normal((steps, n, d))
    coarse = _pairwise_sums(fine) if level >= 1 else fine[:0]
    return fine, coarse


def classic_coupled_increments(level, src, d=1) -> CoupledIncrements:
    fine, coarse = classic_increment_batch(level, src, d, n=1)
    return CoupledIncrements(level=level, fine=fine[:, 0], coarse=coarse[:, 0])


# -- random-bit wavelet driver -------------------------------------------------


def _draw_index_blocks(level, src, d, n):
    """Index blocks in bridge layout: list over i of ``(shifts, n, d)`` arrays."""
    blocks = [
        np.empty((_shift_count(i), n, d), dtype=np.int64) for i in range(level + 1)
    ]
    for dim in range(d):
        for i in range(level + 1):
            blocks[i][:, :, dim] = src.draw_index_block(
                bit_budget(i, level), (_shift_count(i), n)
            )
    return blocks


def draw_lc_indices(level, src, d=1, n=1) -> list[np.ndarray]:
    """Draw the per-resolution grid indices for ``n`` coupled wavelet draws.

    Returns a list over resolutions ``i = 0..level`` of int64 arrays of
    shape ``(n, d, 2**(i-1))`` (last axis 1 for i = 0), each entry a
    ``bit_budget(i, level)``-bit index.  Consumes
    ``n * total_bits(level, d)`` bits.
    """
    level = _check_level(level)
    return [b.transpose(1, 2, 0) for b in _draw_index_blocks(level, src, d, n)]


def _scaled_quantiles(level, i, block, shift):
    q = bit_budget(i, level)
    sigma = np.sqrt(grid_normal_variance(q))
    return quantile_of_index(q, block >> shift) / sigma


def _increments_time_major(level, blocks, shift):
    """Increments ``(2**level, n, d)`` from blocks truncated by ``shift`` bits."""
    if level == 0:
        # single increment: the linear basis function contributes its
        # coefficient outright, no skeleton needed
        return _scaled_quantiles(0, 0, blocks[0], shift).copy()
    coeffs = [
        _scaled_quantiles(level, i, blocks[i], shift) for i in range(level + 1)
    ]
    path = _bridge_time_major(level, coeffs)
    return path[1:] - path[:-1]


def lc_increment_batch(level, src, d=1, n=1):
    """``n`` coupled draws from the random-bit wavelet construction.

    Returns time-major ``(fine, coarse)`` like the classic driver.  The
    coarse increments at ``level - 1`` come from the same index blocks
    with the two trailing bits dropped (the exact grid-coarsening map)
    and the coarse-budget normalization.
    """
    level = _check_level(level)
    blocks = _draw_index_blocks(level, src, d, n)
    fine = _increments_time_major(level, blocks, 0)
    if level == 0:
        return fine, fine[:0]
    return fine, _increments_time_major(level - 1, blocks[:level], 2)


def lc_increments_from_indices(level, indices):
    """Coupled wavelet increments from explicit index blocks.

    ``indices`` as produced by :func:`draw_lc_indices` (arrays shaped
    ``(n, d, shifts)`` holding ``bit_budget(i, level)``-bit indices).
    Returns sample-major ``(fine, coarse)`` of shapes ``(n, 2**level, d)``
    and ``(n, 2**(level-1), d)``; used for exhaustive enumeration where
    the driving indices are constructed rather than drawn.
    """
    level = _check_level(level)
    blocks = [np.ascontiguousarray(ix.transpose(2, 0, 1)) for ix in indices]
    fine = _increments_time_major(level, blocks, 0)
    if level == 0:
        return fine.transpose(1, 0, 2), fine[:0].transpose(1, 0, 2)
    coarse = _increments_time_major(level - 1, blocks[:level], 2)
    return fine.transpose(1, 0, 2), coarse.transpose(1, 0, 2)


def lc_coupled_increments(level, src, d=1) -> CoupledIncrements:
    fine, coarse = lc_increment_batch(level, src, d, n=1)
    return CoupledIncrements(level=level, fine=fine[:, 0], coarse=coarse[:, 0])


# -- fixed-maximal-level bit drivers -----------------------------------------


def _check_fixed_max(level: int, max_level: int) -> tuple[int, int]:
    level = _check_level(level)
    max_level = _check_level(max_level)
    if level > max_level:
        raise ValueError(f"level {level} exceeds the fixed maximal level {max_level}")
    return level, max_level


def iid_increment_batch(level, max_level, src, d=1, n=1):
    """Independent bit-normal increments at the budget of ``max_level``.

    Each scalar fine entry is ``2**(-level/2)`` times a ``max_level``-bit
    normal approximation, so one coupled draw consumes
    ``n * d * 2**level * max_level`` bits.  Coarse entries are pairwise
    sums; their law does not match the next-coarser fine law (that is the
    known defect of this construction).
    """
    level, max_level = _check_fixed_max(level, max_level)
    steps = 1 << level
    idx = src.draw_index_block(max_level, (steps, n, d))
    fine = 2.0 ** (-level / 2.0) * quantile_of_index(max_level, idx)
    coarse = _pairwise_sums(fine) if level >= 1 else fine[:0]
    return fine, coarse


def iid_coupled_increments(level, max_level, src, d=1) -> CoupledIncrements:
    fine, coarse = iid_increment_batch(level, max_level, src, d, n=1)
    return CoupledIncrements(level=level, fine=fine[:, 0], coarse=coarse[:, 0])


def bernoulli_increment_batch(level, max_level, src, d=1, n=1):
    """Scaled coin-flip increments grouped from the ``max_level`` grid.

    Every cell of the ``max_level`` grid carries ``+-2**(-max_level/2)``
    from one fair bit; a level-``level`` entry sums the
    ``2**(max_level - level)`` cells it covers, hence has an affinely
    shifted binomial law and variance exactly ``2**-level``.  One coupled
    draw consumes ``n * d * 2**max_level`` bits.  Coarse entries are
    pairwise sums.
    """
    level, max_level = _check_fixed_max(level, max_level)
    steps = 1 << level
    group = 1 << (max_level - level)
    bits = src.draw_bits(n * d * steps * group).reshape(steps, n, d, group)
    ones = bits.sum(axis=3, dtype=np.int64)
    fine = (2.0 * ones - group) * 2.0 ** (-max_level / 2.0)
    coarse = _pairwise_sums(fine) if level >= 1 else fine[:0]
    return fine, coarse


def bernoulli_coupled_increments(level, max_level, src, d=1) -> CoupledIncrements:
    fine, coarse = bernoulli_increment_batch(level, max_level, src, d, n=1)
    return CoupledIncrements(level=level, fine=fine[:, 0], coarse=coarse[:, 0])
