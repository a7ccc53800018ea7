"""Adaptive multilevel Monte Carlo estimation with exact cost accounting.

The estimator telescopes expected payoff differences over levels: level 0
contributes the plain payoff mean, level ``l >= 1`` the mean of the
coupled difference f(fine at l) - f(coarse at l-1).  Replications per
level follow the cost-weighted optimal allocation for a variance budget
of half the squared accuracy demand; the maximal level grows until the
extrapolated remaining bias fits in the other half.  Level sampling is
batched and accumulated in mergeable streaming moments, so results are
independent of batch sizes and of how replication chunks are distributed
over workers (given the stream assignment).

Costs are the measured ledger deltas, not nominal step counts: the
allocation and the reported totals count exactly the random bits or
random number calls the drivers consumed, including warm-up samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bitcore import BitSource, CostLedger
from .models import ModelSpec
from .schemes import coupled_diff_batch

__all__ = [
    "RunningMoments",
    "LevelStats",
    "MlmcResult",
    "MlmcConfig",
    "NonConvergenceError",
    "estimate_level",
    "optimal_replications",
    "bias_converged",
    "fit_weak_rate",
    "run_adaptive",
]

_ADAPTIVE_DRIVERS = ("classic", "bit-lc")
# batch sizing: aim for ~2**21 path cells per block, capped per block
_BATCH_CELL_TARGET = 1 << 21
_BATCH_MAX = 1 << 19


class RunningMoments:
    """Streaming central moments up to order four, mergeable pairwise.

    ``update`` folds in a batch of values; ``merge`` combines two
    accumulators exactly (up to roundoff), so chunked, serial and parallel
    accumulation agree.
    """

    __slots__ = ("count", "mean", "m2", "m3", "m4")

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        nb = values.size
        if nb == 0:
            return
        other = RunningMoments()
        other.count = nb
        other.mean = float(values.mean())
        centered = values - other.mean
        sq = centered * centered
        other.m2 = float(sq.sum())
        other.m3 = float((sq * centered).sum())
        other.m4 = float((sq * sq).sum())
        self.merge(other)

    def merge(self, other: "RunningMoments") -> None:
        na, nb = self.count, other.count
        if nb == 0:
            return
        if na == 0:
            self.count, self.mean = other.count, other.mean
            self.m2, self.m3, self.m4 = other.m2, other.m3, other.m4
            return
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        self.mean += d_n * nb
        m2a, m2b = self.m2, other.m2
        m3a, m3b = self.m3, other.m3
        self.m4 += (
            other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n**2 * (na * na * m2b + nb * nb * m2a)
            + 4.0 * d_n * (na * m3b - nb * m3a)
        )
        self.m3 += m3b + delta * d_n**2 * na * nb * (na - nb) + 3.0 * d_n * (
            na * m2b - nb * m2a
        )
        self.m2 += m2b + delta * d_n * na * nb
        self.count = n

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0 until two values are seen."""
        return self.m2 / (self.count - 1) if self.count >= 2 else 0.0

    @property
    def fourth_central(self) -> float:
        return self.m4 / self.count if self.count else 0.0

    def se_mean(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count >= 2 else float("inf")

    def se_variance(self) -> float:
        """Asymptotic standard error of the sample variance."""
        if self.count < 2:
            return float("inf")
        v = self.variance
        return math.sqrt(max(self.fourth_central - v * v, 0.0) / self.count)


@dataclass(frozen=True)
class LevelStats:
    """Sample statistics of the coupled payoff difference at one level.

    ``mean_diff`` estimates the level-difference expectation (the plain
    payoff expectation at level 0).  ``cost_per_sample`` is in the
    driver's currency (bits for bit drivers, random number calls for the
    classical driver); the raw tallies are kept alongside.
    ``fourth_central`` feeds asymptotic confidence intervals for the
    variance.
    """

    level: int
    n: int
    mean_diff: float
    var_diff: float
    cost_per_sample: float
    bits_drawn: int
    numbers_drawn: int
    fourth_central: float

    def se_mean(self) -> float:
        return math.sqrt(self.var_diff / self.n) if self.n >= 2 else float("inf")

    def se_var(self) -> float:
        if self.n < 2:
            return float("inf")
        return math.sqrt(max(self.fourth_central - self.var_diff**2, 0.0) / self.n)


@dataclass(frozen=True)
class MlmcResult:
    """Outcome of one adaptive run: telescoped estimate plus diagnostics."""

    estimate: float
    levels: list[LevelStats]
    eps: float
    total_cost: CostLedger
    converged: bool
    weak_rate_alpha: float


class NonConvergenceError(RuntimeError):
    """The level cap was reached before the bias test passed.

    Carries the partial :class:`MlmcResult` (``converged=False``) in
    ``result``.
    """

    def __init__(self, result: MlmcResult) -> None:
        super().__init__(
            f"bias test unmet at the level cap (L={len(result.levels) - 1}) "
            f"for eps={result.eps:g}"
        )
        self.result = result


@dataclass(frozen=True)
class MlmcConfig:
    """What to estimate and the adaptive algorithm's knobs.

    ``n_warm`` samples seed levels 0..2; each later level starts with
    ``n_new`` samples before the allocation tops it up.  ``driver`` must
    be level-extensible (``classic`` or ``bit-lc``): the fixed-maximal-
    level bit drivers are excluded from adaptive runs by construction.
    """

    model: ModelSpec
    scheme: str = "euler"
    driver: str = "classic"
    functional: Optional[str] = None
    max_level: Optional[int] = None  # fixed-L bit drivers only
    n_warm: int = 1000
    n_new: int = 32
    l_max: int = 20
    var_floor: float = 1e-30
    alpha_floor: float = 0.5
    alpha_fit_span: int = 5

    def resolved_functional(self) -> str:
        return self.model.functional if self.functional is None else self.functional

    def cost_currency(self) -> str:
        return "numbers" if self.driver == "classic" else "bits"


def _batch_size(level: int, remaining: int) -> int:
    return max(1, min(remaining, _BATCH_MAX, _BATCH_CELL_TARGET >> level))


class _LevelAccumulator:
    """Per-level moments plus the ledger snapshot discipline."""

    def __init__(self, level: int, src) -> None:
        self.level = level
        self.src = src
        self.moments = RunningMoments()
        self.bits0 = src.ledger.bits_drawn
        self.numbers0 = src.ledger.numbers_drawn

    @property
    def n(self) -> int:
        return self.moments.count

    def bits(self) -> int:
        return self.src.ledger.bits_drawn - self.bits0

    def numbers(self) -> int:
        return self.src.ledger.numbers_drawn - self.numbers0

    def extend(self, config: MlmcConfig, count: int) -> None:
        functional = config.resolved_functional()
        remaining = count
        while remaining > 0:
            block = _batch_size(self.level, remaining)
            diffs = coupled_diff_batch(
                config.model,
                functional,
                config.scheme,
                config.driver,
                self.level,
                self.src,
                block,
                max_level=config.max_level,
            )
            self.moments.update(diffs)
            remaining -= block

    def stats(self, config: MlmcConfig) -> LevelStats:
        m = self.moments
        currency = self.bits() if config.cost_currency() == "bits" else self.numbers()
        return LevelStats(
            level=self.level,
            n=m.count,
            mean_diff=m.mean,
            var_diff=m.variance,
            cost_per_sample=currency / m.count if m.count else float("nan"),
            bits_drawn=self.bits(),
            numbers_drawn=self.numbers(),
            fourth_central=m.fourth_central,
        )


def estimate_level(config: MlmcConfig, level: int, n: int, src) -> LevelStats:
    """Estimate mean/variance of the coupled difference from ``n`` samples.

    One-pass streaming moments; the ledger delta on ``src`` gives the
    exact cost, reported per sample.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    acc = _LevelAccumulator(level, src)
    acc.extend(config, n)
    return acc.stats(config)


def optimal_replications(eps: float, variances, costs) -> np.ndarray:
    """Cost-optimal replication counts for a total variance budget eps^2/2.

    ``N_l = ceil(2 eps^-2 sqrt(V_l / C_l) * sum_m sqrt(V_m C_m))``;
    degenerate variances are floored at a tiny positive value so
    deterministic levels do not divide by zero.
    """
    if eps <= 0.0:
        raise ValueError(f"accuracy demand must be positive, got {eps}")
    v = np.maximum(np.asarray(variances, dtype=np.float64), 1e-30)
    c = np.asarray(costs, dtype=np.float64)
    if np.any(c <= 0.0):
        raise ValueError("per-sample costs must be positive")
    budget_sum = float(np.sum(np.sqrt(v * c)))
    n = np.ceil(2.0 / (eps * eps) * np.sqrt(v / c) * budget_sum)
    return n.astype(np.int64)


def bias_converged(means: Sequence[float], alpha: float, eps: float) -> bool:
    """Remaining-bias test on the level-difference means (levels 1..L).

    Extrapolates the geometric decay at rate ``alpha`` from the last two
    means: converged iff
    ``max(|m_L|, |m_{L-1}| / 2**alpha) / (2**alpha - 1) <= eps / sqrt(2)``.
    """
    if len(means) < 2:
        raise ValueError("need at least two level-difference means")
    if alpha <= 0.0:
        raise ValueError(f"weak rate must be positive, got {alpha}")
    m_last, m_prev = abs(means[-1]), abs(means[-2])
    remaining = max(m_last, m_prev / 2.0**alpha) / (2.0**alpha - 1.0)
    return remaining <= eps / math.sqrt(2.0)


def fit_weak_rate(
    levels: Sequence[int], means: Sequence[float], span: int = 5, floor: float = 0.5
) -> float:
    """Weak decay rate from a least squares fit of log2 |mean| against level.

    Uses the last ``min(len, span)`` levels with nonzero means, floored at
    ``floor``; returns 1.0 when fewer than two usable points exist.
    """
    lv = np.asarray(levels, dtype=np.float64)
    am = np.abs(np.asarray(means, dtype=np.float64))
    keep = am > 0.0
    lv, am = lv[keep], am[keep]
    if lv.size < 2:
        return 1.0
    k = min(lv.size, max(2, span))
    slope = np.polyfit(lv[-k:], np.log2(am[-k:]), 1)[0]
    return max(floor, -float(slope))


def _stream_id(stream_block: int, level: int) -> int:
    # level in the low 24 bits, replication block above: collision-free
    # stream ids for (block, level) pairs without coordination
    return (int(stream_block) << 24) | level


def run_adaptive(
    config: MlmcConfig, eps: float, seed: int, stream_block: int = 0
) -> MlmcResult:
    """The adaptive multilevel estimator for accuracy demand ``eps``.

    Starts with levels 0..2, then alternates between topping levels up to
    the optimal allocation and adding a level whenever the remaining-bias
    test fails.  Each level owns one bit source keyed by
    ``(seed, stream_block, level)``, so results are reproducible and
    independent replications use ``stream_block`` to stay collision-free.

    Raises :class:`NonConvergenceError` (carrying the partial result) if
    the level cap is reached; the spent cost is reported either way.
    """
    if eps <= 0.0:
        raise ValueError(f"accuracy demand must be positive, got {eps}")
    if config.driver not in _ADAPTIVE_DRIVERS:
        raise ValueError(
            f"adaptive runs support drivers {_ADAPTIVE_DRIVERS}, got {config.driver!r}"
        )
    accs: dict[int, _LevelAccumulator] = {}

    def acc(level: int) -> _LevelAccumulator:
        if level not in accs:
            accs[level] = _LevelAccumulator(
                level, BitSource(seed, _stream_id(stream_block, level))
            )
        return accs[level]

    top = 2
    for level in range(top + 1):
        acc(level).extend(config, config.n_warm)

    alpha = 1.0
    converged = False
    while True:
        levels = sorted(accs)
        variances = [max(accs[l].moments.variance, config.var_floor) for l in levels]
        currency = config.cost_currency()
        costs = [
            (accs[l].bits() if currency == "bits" else accs[l].numbers()) / accs[l].n
            for l in levels
        ]
        targets = optimal_replications(eps, variances, costs)
        shortfall = [
            (l, int(t - accs[l].n)) for l, t in zip(levels, targets) if t > accs[l].n
        ]
        if shortfall:
            for level, extra in shortfall:
                acc(level).extend(config, extra)
            continue
        diff_means = [accs[l].moments.mean for l in levels if l >= 1]
        alpha = fit_weak_rate(
            [l for l in levels if l >= 1],
            diff_means,
            span=config.alpha_fit_span,
            floor=config.alpha_floor,
        )
        if bias_converged(diff_means, alpha, eps):
            converged = True
            break
        if top >= config.l_max:
            break
        top += 1
        acc(top).extend(config, config.n_new)

    levels = sorted(accs)
    stats = [accs[l].stats(config) for l in levels]
    total = CostLedger()
    for l in levels:
        total.add(CostLedger(accs[l].bits(), accs[l].numbers()))
    estimate = float(sum(s.mean_diff for s in stats))
    result = MlmcResult(
        estimate=estimate,
        levels=stats,
        eps=eps,
        total_cost=total,
        converged=converged,
        weak_rate_alpha=alpha,
    )
    if not converged:
        raise NonConvergenceError(result)
    return result
