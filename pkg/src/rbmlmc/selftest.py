"""Exact structural invariants of the random-bit machinery.

These checks are deterministic (no statistical tolerance): variance
identities of the Schauder increment coefficients, the damping bound for
unnormalized coefficients, quantile table properties, exact bit counts,
exhaustive law matching of the fine/coarse coupling, grid-coarsening
uniformity, and the nesting of bridge skeletons across levels.  They run
in seconds and are exposed both to pytest and to the command line
(``rbmlmc selftest``).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .bitcore import BitSource
from .drivers import (
    SchauderIndex,
    bit_budget,
    bridge_skeleton,
    draw_lc_indices,
    lc_coupled_increments,
    lc_increments_from_indices,
    schauder_increment,
    total_bits,
)
from .rbnormal import grid_normal_variance, rb_normal_table, round_down

__all__ = ["CheckResult", "run_selftest", "ALL_CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _owning_shift(k: int, i: int, level: int) -> int:
    """1-based shift of the tent whose support contains cell k at the level grid."""
    return ((k - 1) >> (level - i + 1)) + 1


def _squared_increment_sum(k: int, level: int, weights=None) -> float:
    """Sum over resolutions of (cell increment)^2, optionally weighted per budget."""
    total = 0.0
    for i in range(level + 1):
        j = 1 if i == 0 else _owning_shift(k, i, level)
        delta = schauder_increment(SchauderIndex(i, j), k, level)
        w = 1.0 if weights is None else weights[i]
        total += w * delta * delta
    return total


def check_increment_variance_identity(max_level: int = 12) -> CheckResult:
    """Sum of squared increment coefficients equals the step size exactly."""
    worst = 0.0
    for level in range(max_level + 1):
        target = 2.0 ** (-level)
        for k in range(1, (1 << level) + 1):
            rel = abs(_squared_increment_sum(k, level) / target - 1.0)
            worst = max(worst, rel)
    ok = worst <= 1e-12
    return CheckResult(
        "increment-variance-identity",
        ok,
        f"worst relative error {worst:.3e} over levels 0..{max_level} (tol 1e-12)",
    )


def check_unnormalized_variance_bound(max_level: int = 10) -> CheckResult:
    """Without normalization the increment variance is at most 0.9 * 2**-level."""
    worst = 0.0
    for level in range(1, max_level + 1):
        weights = [
            grid_normal_variance(bit_budget(i, level)) for i in range(level + 1)
        ]
        for k in range(1, (1 << level) + 1):
            ratio = _squared_increment_sum(k, level, weights) / 2.0 ** (-level)
            worst = max(worst, ratio)
    ok = worst <= 0.9
    return CheckResult(
        "unnormalized-variance-bound",
        ok,
        f"max variance ratio {worst:.6f} over levels 1..{max_level} (bound 0.9)",
    )


def check_two_bit_variance() -> CheckResult:
    """The 2-bit normal approximation has variance 0.712417, below 4/5."""
    table = rb_normal_table(2)
    ok = abs(table.variance - 0.712417) <= 1e-4 and table.variance <= 0.8
    monotone = all(
        grid_normal_variance(q + 1) > grid_normal_variance(q) for q in range(1, 12)
    )
    below_one = all(grid_normal_variance(q) <= 1.0 for q in range(1, 13))
    ok = ok and monotone and below_one
    return CheckResult(
        "two-bit-variance",
        ok,
        f"variance(q=2) = {table.variance:.6f} (target 0.712417, cap 0.8); "
        f"monotone={monotone}, below one for q<=12: {below_one}",
    )


def check_bit_count_identity(max_level: int = 12, dims=(1, 2, 3)) -> CheckResult:
    """One coupled wavelet draw consumes exactly d * (2**(level+2) - 2) bits."""
    for d in dims:
        for level in range(max_level + 1):
            src = BitSource(2024, stream_id=level + 100 * d)
            lc_coupled_increments(level, src, d=d)
            expected = total_bits(level, d)
            direct = d * (
                bit_budget(0, level)
                + sum(
                    (1 << (i - 1)) * bit_budget(i, level)
                    for i in range(1, level + 1)
                )
            )
            if src.ledger.bits_drawn != expected or direct != expected:
                return CheckResult(
                    "bit-count-identity",
                    False,
                    f"level {level}, d={d}: ledger {src.ledger.bits_drawn}, "
                    f"closed form {expected}, direct sum {direct}",
                )
    return CheckResult(
        "bit-count-identity",
        True,
        f"ledger equals d*(2**(l+2)-2) for l<=12, d in {tuple(dims)}",
    )


def _decode_patterns(level: int) -> list[np.ndarray]:
    """Index blocks for every bit pattern of one coupled draw (d = 1).

    Pattern bits are assigned in the documented draw order: resolutions in
    increasing order, shifts in increasing order, most significant bit
    first within each index.
    """
    n_bits = total_bits(level, 1)
    patterns = np.arange(1 << n_bits, dtype=np.int64)
    blocks = []
    consumed = 0
    for i in range(level + 1):
        q = bit_budget(i, level)
        shifts = 1 if i == 0 else 1 << (i - 1)
        cols = []
        for _ in range(shifts):
            consumed += q
            cols.append((patterns >> (n_bits - consumed)) & ((1 << q) - 1))
        blocks.append(np.stack(cols, axis=1)[:, None, :])
    return blocks


def _law_of_rows(rows: np.ndarray) -> Counter:
    return Counter(tuple(row) for row in rows)


def check_coupling_law_match() -> CheckResult:
    """Exhaustive check that coarse draws at level l match fine draws at l-1.

    All 2**6 patterns at level 1 and all 2**14 patterns at level 2 are
    enumerated; supports and probabilities must agree exactly with the
    fine law one level down.
    """
    for level in (1, 2):
        fine_prev, _ = lc_increments_from_indices(
            level - 1, _decode_patterns(level - 1)
        )
        _, coarse = lc_increments_from_indices(level, _decode_patterns(level))
        law_prev = _law_of_rows(fine_prev[:, :, 0])
        law_coarse = _law_of_rows(coarse[:, :, 0])
        n_prev = 1 << total_bits(level - 1, 1)
        n_here = 1 << total_bits(level, 1)
        scale = n_here // n_prev
        if set(law_prev) != set(law_coarse):
            return CheckResult(
                "coupling-law-match", False, f"support mismatch at level {level}"
            )
        bad = [v for v in law_prev if law_coarse[v] != scale * law_prev[v]]
        if bad:
            return CheckResult(
                "coupling-law-match",
                False,
                f"probability mismatch at level {level} for {len(bad)} atoms",
            )
    return CheckResult(
        "coupling-law-match",
        True,
        "coarse law equals next-coarser fine law (levels 1 and 2, exhaustive)",
    )


def check_round_down_uniformity(max_q: int = 12) -> CheckResult:
    """Coarsening a two-bit-finer grid hits every coarse point exactly 4 times."""
    for q in range(1, max_q + 1):
        fine_points = (np.arange(1 << (q + 2), dtype=np.float64) + 0.5) * 2.0 ** (
            -(q + 2)
        )
        coarsened = round_down(q, fine_points)
        values, counts = np.unique(coarsened, return_counts=True)
        expected = (np.arange(1 << q, dtype=np.float64) + 0.5) * 2.0 ** (-q)
        if values.size != 1 << q or not np.array_equal(values, expected):
            return CheckResult(
                "round-down-uniformity", False, f"image mismatch at q={q}"
            )
        if not np.all(counts == 4):
            return CheckResult(
                "round-down-uniformity", False, f"multiplicity mismatch at q={q}"
            )
    return CheckResult(
        "round-down-uniformity", True, f"exact 4-to-1 pushforward for q = 1..{max_q}"
    )


def check_skeleton_nesting(fine_level: int = 8, coarse_level: int = 4) -> CheckResult:
    """A deeper Gaussian skeleton restricted to a coarser grid is the coarser skeleton."""
    src = BitSource(7, stream_id=9)
    coeffs = [
        src.draw_std_normal((3, 1 if i == 0 else 1 << (i - 1)))
        for i in range(fine_level + 1)
    ]
    deep = bridge_skeleton(fine_level, coeffs)
    shallow = bridge_skeleton(coarse_level, coeffs[: coarse_level + 1])
    stride = 1 << (fine_level - coarse_level)
    worst = float(np.max(np.abs(deep[:, ::stride] - shallow)))
    ok = worst <= 1e-12
    return CheckResult(
        "skeleton-nesting",
        ok,
        f"max deviation {worst:.3e} restricting level {fine_level} to "
        f"level {coarse_level} (tol 1e-12)",
    )


def check_bridge_matches_direct_sum(max_level: int = 6) -> CheckResult:
    """Bridge refinement agrees with the naive sum over basis increments."""
    worst = 0.0
    for level in range(max_level + 1):
        src = BitSource(11, stream_id=level)
        indices = draw_lc_indices(level, src, d=1, n=4)
        fine, _ = lc_increments_from_indices(level, indices)
        tables = [rb_normal_table(bit_budget(i, level)) for i in range(level + 1)]
        coeffs = [
            tables[i].quantile(indices[i][:, 0, :]) / tables[i].sigma
            for i in range(level + 1)
        ]
        for k in range(1, (1 << level) + 1):
            direct = np.zeros(4)
            for i in range(level + 1):
                j = 1 if i == 0 else _owning_shift(k, i, level)
                delta = schauder_increment(SchauderIndex(i, j), k, level)
                if delta != 0.0:
                    direct += delta * coeffs[i][:, j - 1]
            worst = max(worst, float(np.max(np.abs(direct - fine[:, k - 1, 0]))))
    ok = worst <= 1e-12
    return CheckResult(
        "bridge-vs-direct-sum",
        ok,
        f"max deviation {worst:.3e} for levels 0..{max_level} (tol 1e-12)",
    )


ALL_CHECKS = (
    check_increment_variance_identity,
    check_unnormalized_variance_bound,
    check_two_bit_variance,
    check_bit_count_identity,
    check_coupling_law_match,
    check_round_down_uniformity,
    check_skeleton_nesting,
    check_bridge_matches_direct_sum,
)


def run_selftest() -> list[CheckResult]:
    """Run every exact invariant check and return the results."""
    return [check() for check in ALL_CHECKS]
