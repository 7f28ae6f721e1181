"""Grid search for the index decay ``lambda``.

For each candidate the full model is fitted, one synthetic series of the
same length is simulated with a fixed seed (the same seed for every
candidate), and the percentage ACF error of ``|Z|`` against the input is
the objective.  The smallest objective wins; ties go to the larger lambda.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretization import StateSpace
from .errors import ComputationError
from .ingestion import LogChangeSeries
from .kernel import fit_model
from .simulation import SimulationConfig, simulate
from .stats import acf_abs, acf_rmse_percent

DEFAULT_GRID = tuple(round(0.90 + 0.01 * k, 2) for k in range(10))


class CalibrationError(ComputationError):
    def __init__(self, lam: float, cause: Exception):
        super().__init__(f"lambda={lam}: {cause}")
        self.lam = lam
        self.cause = cause


@dataclass
class CalibrationConfig:
    seed: int = 0
    space: StateSpace | None = None
    bin_count: int = 5
    max_lag: int = 100
    max_sojourn: int | None = None
    workers: int = 1


@dataclass
class CalibrationResult:
    lambda_grid: list[float]
    objective_values: list[float]
    best_lambda: float


def select_lambda(grid: Sequence[float], objectives: Sequence[float]) -> float:
    best = min(objectives)
    return max(lam for lam, obj in zip(grid, objectives) if obj == best)


def lambda_objective(values: np.ndarray, lam: float, cfg: CalibrationConfig) -> float:
    try:
        model = fit_model(values, lam, space=cfg.space, bin_count=cfg.bin_count, max_sojourn=cfg.max_sojourn)
        run = simulate(model, SimulationConfig(seed=cfg.seed, horizon=len(values)))
        real = acf_abs(values, cfg.max_lag)
        synth = acf_abs(run.value_series, cfg.max_lag)
        return acf_rmse_percent(real, synth)
    except ComputationError as exc:
        raise CalibrationError(lam, exc) from exc


def _objective_job(args):
    return lambda_objective(*args)


def calibrate_lambda(series: LogChangeSeries | Sequence[float] | np.ndarray,
                     grid: Sequence[float] = DEFAULT_GRID,
                     cfg: CalibrationConfig | None = None) -> CalibrationResult:
    cfg = cfg or CalibrationConfig()
    grid = [float(lam) for lam in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    bad = [lam for lam in grid if not 0.0 < lam <= 1.0]
    if bad:
        raise ValueError(f"lambda values outside (0, 1]: {bad}")
    values = series.values if isinstance(series, LogChangeSeries) else np.asarray(series, dtype=float)

    jobs = [(values, lam, cfg) for lam in grid]
    if cfg.workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            objectives = list(pool.map(_objective_job, jobs))
    else:
        objectives = [_objective_job(job) for job in jobs]
    return CalibrationResult(grid, objectives, select_lambda(grid, objectives))
