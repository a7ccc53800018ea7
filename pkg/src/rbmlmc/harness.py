"""Experiment runner: level tables, accuracy sweeps, and cost curve fits.

``run_levels`` tabulates per-level bias/variance of the coupled payoff
difference with 0.95 normal-approximation confidence intervals and the
measured per-sample costs in both currencies.  ``run_rmse`` repeats the
whole adaptive estimator over an accuracy grid and reports the achieved
root mean squared error against the model's analytic value together with
mean total costs.  ``fit_cost_curve`` fits ``cost = kappa * rmse**-2 *
(ln 1/rmse)**gamma`` by least squares in log space (gamma on a grid,
kappa in closed form), and ``fit_cost_pair`` fits two curves with a
shared log-exponent to compare their cost constants at matched accuracy.

Repetitions are embarrassingly parallel; set ``RBMLMC_THREADS`` to spread
them over a thread pool (results are identical to the serial run because
every repetition owns its own streams).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bitcore import BitSource
from .mlmc import LevelStats, MlmcConfig, estimate_level, run_adaptive
from .models import ModelSpec, get_model

__all__ = [
    "ExperimentConfig",
    "CostFitResult",
    "PairedCostFit",
    "LEVELS_HEADER",
    "RMSE_HEADER",
    "parse_eps_grid",
    "run_levels",
    "run_rmse",
    "fit_cost_curve",
    "fit_cost_pair",
    "write_rows_csv",
    "write_report_json",
]

LEVELS_HEADER = (
    "level",
    "bias",
    "bias_ci_lo",
    "bias_ci_hi",
    "var",
    "var_ci_lo",
    "var_ci_hi",
    "cost_numbers",
    "cost_bits",
)
RMSE_HEADER = ("eps", "rmse", "rmse_ci_lo", "rmse_ci_hi", "cost_numbers", "cost_bits")

_Z95 = 1.959963984540054  # two-sided 0.95 normal quantile
_FIXED_L_DRIVERS = ("bit-iid", "bit-bern")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: model/scheme/driver plus grids and budgets.

    ``scheme="auto"`` resolves to the positive-part Euler scheme for the
    square root model and the plain Euler scheme otherwise.  The fixed-
    maximal-level drivers need ``fixed_max_level`` (defaulting to the top
    of the level grid) and are rejected for accuracy sweeps, which run
    the adaptive estimator.
    """

    model: str
    scheme: str = "auto"
    driver: str = "classic"
    levels: tuple = ()
    eps_grid: tuple = ()
    repetitions: int = 2000
    seed: int = 1
    fixed_max_level: Optional[int] = None
    n_warm: int = 1000
    n_new: int = 32
    l_max: int = 20

    def resolved_scheme(self, model: ModelSpec) -> str:
        if self.scheme != "auto":
            return self.scheme
        return "euler-pos" if model.name == "cir" else "euler"

    def to_mlmc_config(self) -> MlmcConfig:
        model = get_model(self.model)
        scheme = self.resolved_scheme(model)
        if scheme == "milstein" and model.name != "cir":
            raise ValueError("the truncated Milstein scheme requires the cir model")
        max_level = self.fixed_max_level
        if self.driver in _FIXED_L_DRIVERS and max_level is None:
            max_level = max(self.levels) if self.levels else None
            if max_level is None:
                raise ValueError(
                    f"driver {self.driver!r} needs fixed_max_level or a level grid"
                )
        return MlmcConfig(
            model=model,
            scheme=scheme,
            driver=self.driver,
            max_level=max_level,
            n_warm=self.n_warm,
            n_new=self.n_new,
            l_max=self.l_max,
        )


def parse_eps_grid(text: str) -> tuple:
    """Parse ``start:stop:count[log|lin]`` (or a single value) into a grid."""
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise ValueError(f"grid must be 'start:stop:count[log|lin]', got {text!r}")
    start, stop = float(parts[0]), float(parts[1])
    count_text = parts[2]
    spacing = "lin"
    for suffix in ("log", "lin"):
        if count_text.endswith(suffix):
            spacing = suffix
            count_text = count_text[: -len(suffix)]
    count = int(count_text)
    if count < 1:
        raise ValueError(f"grid needs at least one point, got {count}")
    if count == 1:
        return (start,)
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ValueError("log spacing requires positive endpoints")
        return tuple(np.geomspace(start, stop, count))
    return tuple(np.linspace(start, stop, count))


def _level_row(stats: LevelStats) -> dict:
    half_mean = _Z95 * stats.se_mean()
    half_var = _Z95 * stats.se_var()
    return {
        "level": stats.level,
        "bias": stats.mean_diff,
        "bias_ci_lo": stats.mean_diff - half_mean,
        "bias_ci_hi": stats.mean_diff + half_mean,
        "var": stats.var_diff,
        "var_ci_lo": max(stats.var_diff - half_var, 0.0),
        "var_ci_hi": stats.var_diff + half_var,
        "cost_numbers": stats.numbers_drawn / stats.n,
        "cost_bits": stats.bits_drawn / stats.n,
    }


def run_levels(config: ExperimentConfig) -> list[dict]:
    """Per-level bias/variance table of the coupled payoff difference.

    One row per level of ``config.levels``, each from
    ``config.repetitions`` independent coupled samples on its own stream.
    CI columns are the 0.95 normal-approximation bounds; costs are the
    measured per-sample draws in each currency.
    """
    if not config.levels:
        raise ValueError("level grid is empty")
    if config.repetitions < 2:
        raise ValueError("need at least 2 repetitions per level")
    mlmc_config = config.to_mlmc_config()
    rows = []
    for level in config.levels:
        src = BitSource(config.seed, stream_id=int(level))
        stats = estimate_level(mlmc_config, int(level), config.repetitions, src)
        rows.append(_level_row(stats))
    return rows


def _rmse_point(args) -> dict:
    config, mlmc_config, eps, analytic = args
    reps = config.repetitions

    def one(rep: int):
        result = run_adaptive(mlmc_config, eps, config.seed, stream_block=rep + 1)
        err2 = (result.estimate - analytic) ** 2
        return err2, result.total_cost.numbers_drawn, result.total_cost.bits_drawn

    workers = int(os.environ.get("RBMLMC_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(reps)))
    else:
        outcomes = [one(rep) for rep in range(reps)]
    err2 = np.array([o[0] for o in outcomes])
    mean_err2 = float(err2.mean())
    se_err2 = float(err2.std(ddof=1) / math.sqrt(reps))
    return {
        "eps": eps,
        "rmse": math.sqrt(mean_err2),
        "rmse_ci_lo": math.sqrt(max(mean_err2 - _Z95 * se_err2, 0.0)),
        "rmse_ci_hi": math.sqrt(mean_err2 + _Z95 * se_err2),
        "cost_numbers": float(np.mean([o[1] for o in outcomes])),
        "cost_bits": float(np.mean([o[2] for o in outcomes])),
    }


def run_rmse(config: ExperimentConfig) -> list[dict]:
    """Accuracy sweep: achieved RMSE and mean cost per accuracy demand.

    Each grid point repeats the full adaptive estimator
    ``config.repetitions`` times on disjoint streams and compares against
    the model's analytic expectation.
    """
    if not config.eps_grid:
        raise ValueError("accuracy grid is empty")
    if config.repetitions < 100:
        raise ValueError("RMSE estimation needs at least 100 repetitions")
    if config.driver in _FIXED_L_DRIVERS:
        raise ValueError(
            f"driver {config.driver!r} has a fixed maximal level and is "
            "excluded from adaptive accuracy sweeps"
        )
    mlmc_config = config.to_mlmc_config()
    analytic = mlmc_config.model.analytic_value
    if analytic is None:
        raise ValueError(f"model {config.model!r} has no analytic reference value")
    return [
        _rmse_point((config, mlmc_config, float(eps), analytic))
        for eps in config.eps_grid
    ]


# -- cost curve fits ---------------------------------------------------------


@dataclass(frozen=True)
class CostFitResult:
    """Parameters of ``cost ~ kappa * rmse**-2 * (ln 1/rmse)**gamma``."""

    kappa: float
    gamma: float
    residual: float


@dataclass(frozen=True)
class PairedCostFit:
    """Two cost curves fitted with a shared log-exponent."""

    gamma: float
    kappa_a: float
    kappa_b: float
    residual: float

    @property
    def ratio(self) -> float:
        return self.kappa_a / self.kappa_b


_GAMMA_GRID = np.round(np.arange(-1.0, 3.0 + 1e-9, 0.05), 2)


def _fit_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    pts = [(float(r), float(c)) for r, c in points]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points to fit, got {len(pts)}")
    rmse = np.array([p[0] for p in pts])
    cost = np.array([p[1] for p in pts])
    if np.any(rmse <= 0.0) or np.any(rmse >= 1.0) or np.any(cost <= 0.0):
        raise ValueError("fit requires rmse in (0, 1) and positive costs")
    if rmse.max() / rmse.min() < 10.0:
        raise ValueError("fit requires points spanning at least a decade in rmse")
    return rmse, cost


def _log_model(rmse: np.ndarray, gamma: float) -> np.ndarray:
    return -2.0 * np.log(rmse) + gamma * np.log(np.log(1.0 / rmse))


def fit_cost_curve(points) -> CostFitResult:
    """Least squares fit of the cost model in log space.

    The log-exponent is searched on a grid over [-1, 3] with step 0.05;
    the constant is the closed-form optimum per candidate exponent.
    ``residual`` is the root mean squared log-space residual.
    """
    rmse, cost = _fit_arrays(points)
    log_cost = np.log(cost)
    best = None
    for gamma in _GAMMA_GRID:
        base = _log_model(rmse, gamma)
        log_kappa = float(np.mean(log_cost - base))
        sse = float(np.sum((log_cost - base - log_kappa) ** 2))
        if best is None or sse < best[0]:
            best = (sse, gamma, log_kappa)
    sse, gamma, log_kappa = best
    return CostFitResult(
        kappa=math.exp(log_kappa),
        gamma=float(gamma),
        residual=math.sqrt(sse / rmse.size),
    )


def fit_cost_pair(points_a, points_b) -> PairedCostFit:
    """Fit two cost curves with one shared log-exponent.

    Minimizes the pooled log-space squared error; the constants (and
    their ratio) compare the two algorithms at matched accuracy.
    """
    rmse_a, cost_a = _fit_arrays(points_a)
    rmse_b, cost_b = _fit_arrays(points_b)
    log_a, log_b = np.log(cost_a), np.log(cost_b)
    best = None
    for gamma in _GAMMA_GRID:
        base_a = _log_model(rmse_a, gamma)
        base_b = _log_model(rmse_b, gamma)
        ka = float(np.mean(log_a - base_a))
        kb = float(np.mean(log_b - base_b))
        sse = float(
            np.sum((log_a - base_a - ka) ** 2) + np.sum((log_b - base_b - kb) ** 2)
        )
        if best is None or sse < best[0]:
            best = (sse, gamma, ka, kb)
    sse, gamma, ka, kb = best
    return PairedCostFit(
        gamma=float(gamma),
        kappa_a=math.exp(ka),
        kappa_b=math.exp(kb),
        residual=math.sqrt(sse / (rmse_a.size + rmse_b.size)),
    )


# -- output ------------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)  # shortest round-trip decimal
    return str(value)


def write_rows_csv(path: str, header: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(row[key]) for key in header])


def write_report_json(
    path: str, config: ExperimentConfig, rows: Sequence[dict], wall_seconds: float,
    fit: Optional[CostFitResult] = None,
) -> None:
    report = {
        "config": asdict(config),
        "rows": list(rows),
        "total_wall_seconds": wall_seconds,
    }
    if fit is not None:
        report["fit"] = asdict(fit)
    with open(path, "w") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")
