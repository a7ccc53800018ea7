"""Path discretization schemes and payoff evaluation on path skeletons.

The Euler scheme (optionally with a positive-part clamp after every step)
and the positivity-preserving truncated Milstein scheme for the square
root diffusion consume driving increments from :mod:`rbmlmc.drivers`.
Payoffs are evaluated on the skeleton of grid values; both supported
functionals (terminal value, running maximum) depend only on nodal values
since the piecewise linear interpolant attains its extrema at the nodes.

Single-sample functions return :class:`PathSkeleton` objects; the batched
cores evolve whole sample blocks per time step and never materialize the
skeletons, keeping memory at O(batch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import lookup_kernel
from .bitcore import CostLedger
from .drivers import (
    bernoulli_increment_batch,
    classic_increment_batch,
    iid_increment_batch,
    lc_increment_batch,
)
from .models import ModelSpec

__all__ = [
    "PathSkeleton",
    "CoupledPayoffSample",
    "NumericalFailure",
    "euler_path",
    "milstein_trunc_step",
    "milstein_trunc_path",
    "evaluate_payoff",
    "coupled_payoff",
    "coupled_payoff_batch",
    "coupled_diff_batch",
    "SCHEME_KINDS",
    "DRIVER_KINDS",
]

SCHEME_KINDS = ("euler", "euler-pos", "milstein")
DRIVER_KINDS = ("classic", "bit-lc", "bit-iid", "bit-bern")


class NumericalFailure(RuntimeError):
    """A path state became non-finite; carries level and 1-based step index."""

    def __init__(self, level: int, step: int) -> None:
        super().__init__(f"non-finite state at level {level}, step {step}")
        self.level = level
        self.step = step


@dataclass(frozen=True)
class PathSkeleton:
    """Grid values of one simulated path: ``2**level + 1`` states."""

    level: int
    values: np.ndarray


@dataclass(frozen=True)
class CoupledPayoffSample:
    """Payoffs of one coupled fine/coarse draw and the randomness it cost.

    At level 0 there is no coarse path: ``coarse_payoff`` is 0 by contract
    and ``diff`` equals ``fine_payoff``.
    """

    fine_payoff: float
    coarse_payoff: float
    diff: float
    cost: CostLedger


def _check_increments(model: ModelSpec, level: int, inc) -> np.ndarray:
    inc = np.asarray(inc, dtype=np.float64)
    if inc.ndim == 1:
        inc = inc[:, None]
    steps = 1 << level
    if inc.shape != (steps, model.d):
        raise ValueError(
            f"expected {steps} increments of dimension {model.d}, got {inc.shape}"
        )
    return inc


def euler_path(
    model: ModelSpec, level: int, inc, positive_part: bool = False
) -> PathSkeleton:
    """Euler scheme along one increment sequence.

    Each step adds ``2**-level * a(x) + b(x) @ inc[k]``; with
    ``positive_part`` the state is clamped at 0 componentwise after every
    update.  Raises :class:`NumericalFailure` if a state goes non-finite.
    """
    inc = _check_increments(model, level, inc)
    steps = 1 << level
    h = 2.0 ** (-level)
    scalar = model.r == 1 and model.d == 1
    x = np.float64(model.x0) if scalar else np.asarray(model.x0, dtype=np.float64)
    values = np.empty((steps + 1,) if scalar else (steps + 1, model.r))
    values[0] = x
    for k in range(1, steps + 1):
        if scalar:
            x = x + h * model.drift(x) + model.diffusion(x) * inc[k - 1, 0]
        else:
            x = x + h * model.drift(x) + model.diffusion(x) @ inc[k - 1]
        if positive_part:
            x = np.maximum(x, 0.0)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure(level, k)
        values[k] = x
    return PathSkeleton(level=level, values=values)


def milstein_trunc_step(x, h, w):
    """One step of the truncated Milstein map for the square root diffusion.

    ``max(0, (max(sqrt(h), sqrt(max(h, x)) + w))**2 + (1/2 - x) * h)``,
    evaluated exactly as written: the inner maxima floor the diffusion
    argument, the outer maximum enforces nonnegativity.  The drift
    correction term hard-codes the benchmark square-root model
    (drift 3/2 - x, diffusion 2 sqrt(x)).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    root = np.maximum(np.sqrt(h), np.sqrt(np.maximum(h, x)) + w)
    out = np.maximum(0.0, root * root + (0.5 - x) * h)
    if out.ndim == 0:
        return float(out)
    return out


def milstein_trunc_path(model: ModelSpec, level: int, inc) -> PathSkeleton:
    """Iterate the truncated Milstein map along one increment sequence.

    Only valid for the built-in square root model, whose coefficients the
    step map hard-codes.
    """
    if model.name != "cir" or model.r != 1 or model.d != 1:
        raise ValueError("the truncated Milstein scheme is specific to the cir model")
    inc = _check_increments(model, level, inc)
    steps = 1 << level
    h = 2.0 ** (-level)
    values = np.empty(steps + 1)
    values[0] = model.x0
    x = float(model.x0)
    for k in range(1, steps + 1):
        x = milstein_trunc_step(x, h, inc[k - 1, 0])
        if not np.isfinite(x):
            raise NumericalFailure(level, k)
        values[k] = x
    return PathSkeleton(level=level, values=values)


def evaluate_payoff(functional: str, path: PathSkeleton) -> float:
    """Payoff of a skeleton: last value, or maximum over grid values."""
    if functional == "terminal":
        return float(path.values[-1])
    if functional == "max":
        return float(np.max(path.values))
    raise ValueError(f"unknown functional kind {functional!r}")


# -- batched cores ----------------------------------------------------------


def _draw_batch(driver: str, level: int, src, d: int, n: int, max_level):
    if driver == "classic":
        return classic_increment_batch(level, src, d, n)
    if driver == "bit-lc":
        return lc_increment_batch(level, src, d, n)
    if driver in ("bit-iid", "bit-bern"):
        if max_level is None:
            raise ValueError(f"driver {driver!r} needs an explicit fixed maximal level")
        if driver == "bit-iid":
            return iid_increment_batch(level, max_level, src, d, n)
        return bernoulli_increment_batch(level, max_level, src, d, n)
    raise ValueError(f"unknown driver kind {driver!r}; known: {DRIVER_KINDS}")


def _payoff_batch(model: ModelSpec, functional: str, scheme: str, level: int, inc):
    """Payoffs for a block of scalar paths; ``inc`` is time-major (steps, n, d)."""
    if model.r != 1 or model.d != 1:
        raise ValueError("batched payoff evaluation supports scalar models only")
    if functional not in ("max", "terminal"):
        raise ValueError(f"unknown functional kind {functional!r}")
    if scheme not in SCHEME_KINDS:
        raise ValueError(f"unknown scheme kind {scheme!r}; known: {SCHEME_KINDS}")
    steps, n, _ = inc.shape
    h = 1.0 / steps
    series = inc[:, :, 0]
    kernel = lookup_kernel(model.name, scheme, functional)
    if kernel is not None:
        out, bad_step = kernel(np.ascontiguousarray(series), model.x0, h)
        if bad_step:
            raise NumericalFailure(level, bad_step)
        return out
    x = np.full(n, model.x0)
    if scheme == "milstein":
        if model.name != "cir":
            raise ValueError("the truncated Milstein scheme is specific to the cir model")
        peak = np.full(n, model.x0) if functional == "max" else None
        for k in range(steps):
            x = milstein_trunc_step(x, h, series[k])
            if not np.all(np.isfinite(x)):
                raise NumericalFailure(level, k + 1)
            if peak is not None:
                np.maximum(peak, x, out=peak)
        return peak if peak is not None else x
    positive = scheme == "euler-pos"
    running_max = np.full(n, model.x0) if functional == "max" else None
    for k in range(steps):
        x = x + h * model.drift(x) + model.diffusion(x) * series[k]
        if positive:
            np.maximum(x, 0.0, out=x)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure(level, k + 1)
        if running_max is not None:
            np.maximum(running_max, x, out=running_max)
    return running_max if running_max is not None else x


def coupled_payoff_batch(
    model: ModelSpec,
    functional: str,
    scheme: str,
    driver: str,
    level: int,
    src,
    n: int,
    max_level=None,
):
    """``n`` coupled draws: fine payoffs and coarse payoffs as two arrays.

    At level 0 the coarse payoffs are zeros by contract.  Cost is tallied
    on ``src.ledger`` by the drivers.
    """
    fine, coarse = _draw_batch(driver, level, src, model.d, n, max_level)
    pf = _payoff_batch(model, functional, scheme, level, fine)
    if level == 0:
        return pf, np.zeros_like(pf)
    return pf, _payoff_batch(model, functional, scheme, level - 1, coarse)


def coupled_diff_batch(
    model: ModelSpec,
    functional: str,
    scheme: str,
    driver: str,
    level: int,
    src,
    n: int,
    max_level=None,
) -> np.ndarray:
    """``n`` coupled payoff differences f(fine) - f(coarse) as one array."""
    pf, pc = coupled_payoff_batch(
        model, functional, scheme, driver, level, src, n, max_level
    )
    return pf - pc


def coupled_payoff(
    model: ModelSpec,
    functional: str | None,
    scheme: str,
    driver: str,
    level: int,
    src,
    max_level=None,
) -> CoupledPayoffSample:
    """One coupled fine/coarse payoff sample with its exact cost delta."""
    functional = model.functional if functional is None else functional
    before = src.ledger.copy()
    pf, pc = coupled_payoff_batch(
        model, functional, scheme, driver, level, src, 1, max_level
    )
    cost = src.ledger.delta_since(before)
    fine, coarse = float(pf[0]), float(pc[0])
    return CoupledPayoffSample(
        fine_payoff=fine, coarse_payoff=coarse, diff=fine - coarse, cost=cost
    )
