"""Benchmark SDE problems with known expectations.

Each model is an autonomous SDE on [0, 1] with deterministic initial
value, a payoff functional on the path, and (for the built-ins) the
analytic value of the expected payoff.  Coefficient functions are
vectorized over numpy arrays of states; for the scalar built-ins they map
``(...,)`` arrays elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

__all__ = ["ModelSpec", "gbm_model", "ou_model", "cir_model", "get_model"]


@dataclass(frozen=True)
class ModelSpec:
    """An SDE problem: dX = a(X) dt + b(X) dW on [0, 1], payoff f(X).

    ``r`` is the state dimension and ``d`` the driving dimension.  For
    scalar models (r = d = 1) the coefficients map state arrays
    elementwise; for vector models ``a`` maps ``(..., r)`` to ``(..., r)``
    and ``b`` maps ``(..., r)`` to ``(..., r, d)``.  ``functional`` is
    ``"max"`` (running maximum, scalar models only) or ``"terminal"``.
    ``analytic_value`` is the reference expectation when known.
    """

    name: str
    r: int
    d: int
    x0: float
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    functional: str
    analytic_value: Optional[float] = None

    def __post_init__(self) -> None:
        if self.functional not in ("max", "terminal"):
            raise ValueError(f"unknown functional kind {self.functional!r}")
        if self.functional == "max" and self.r != 1:
            raise ValueError("the max functional is defined for scalar states only")


def _gbm_drift(x):
    return x / 50.0


def _gbm_diffusion(x):
    return x / 5.0


def _ou_drift(x):
    return 2.0 - x


def _ou_diffusion(x):
    return np.ones_like(x)


def _cir_drift(x):
    return 1.5 - x


def _cir_diffusion(x):
    # sqrt argument floored at 0 so the coefficient is total even if a
    # scheme without positivity enforcement wanders below the boundary
    return 2.0 * np.sqrt(np.maximum(x, 0.0))


def gbm_model() -> ModelSpec:
    """Geometric Brownian motion dX = X/50 dt + X/5 dW, x0 = 1, payoff max X.

    The expected running maximum has the closed form
    ``2 * exp(1/50) * Phi(1/5) = 1.18192...``.
    """
    analytic = 2.0 * math.exp(1.0 / 50.0) * float(ndtr(0.2))
    return ModelSpec(
        name="gbm",
        r=1,
        d=1,
        x0=1.0,
        drift=_gbm_drift,
        diffusion=_gbm_diffusion,
        functional="max",
        analytic_value=analytic,
    )


def ou_model() -> ModelSpec:
    """Ornstein-Uhlenbeck dX = (2 - X) dt + dW, x0 = 1, payoff X(1).

    Expected terminal value ``2 - exp(-1) = 1.63212...``.
    """
    return ModelSpec(
        name="ou",
        r=1,
        d=1,
        x0=1.0,
        drift=_ou_drift,
        diffusion=_ou_diffusion,
        functional="terminal",
        analytic_value=2.0 - math.exp(-1.0),
    )


def cir_model() -> ModelSpec:
    """Cox-Ingersoll-Ross dX = (3/2 - X) dt + 2 sqrt(X) dW, x0 = 1, payoff X(1).

    Expected terminal value ``exp(-1) + (3/2)(1 - exp(-1)) = 1.31606...``.
    """
    return ModelSpec(
        name="cir",
        r=1,
        d=1,
        x0=1.0,
        drift=_cir_drift,
        diffusion=_cir_diffusion,
        functional="terminal",
        analytic_value=math.exp(-1.0) + 1.5 * (1.0 - math.exp(-1.0)),
    )


_BUILTINS = {"gbm": gbm_model, "ou": ou_model, "cir": cir_model}


def get_model(name: str) -> ModelSpec:
    """Look up a built-in model by name."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; built-ins are {sorted(_BUILTINS)}"
        ) from None
