"""Validation statistics: |Z| autocorrelation, ACF error, first passage times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError, ZeroVarianceError

CORRELATION = "correlation"
COVARIANCE = "covariance"
EVERY_BAR = "every-bar"


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    values: np.ndarray
    normalization: str
    lag0: float


def acf_abs(series, max_lag: int = 100, normalization: str = CORRELATION) -> AcfResult:
    """Autocovariance (or autocorrelation) of ``|Z|`` at lags ``1..max_lag``.

    Lag ``tau`` averages the ``N - tau`` overlapping products of deviations
    from the overall mean of ``|Z|``.  Correlation mode divides by the lag-0
    value and raises ``ZeroVarianceError`` for a constant ``|Z|``.
    """
    if normalization not in (CORRELATION, COVARIANCE):
        raise ValueError(f"unknown normalization {normalization!r}")
    x = np.abs(np.asarray(series, dtype=float))
    n = len(x)
    if max_lag < 1:
        raise ValueError("max_lag must be at least 1")
    if max_lag >= n - 1:
        raise PreconditionError(f"max_lag {max_lag} too large for a series of length {n}")
    dev = x - x.mean()
    cov = np.array([np.dot(dev[tau:], dev[: n - tau]) / (n - tau) for tau in range(max_lag + 1)])
    if normalization == CORRELATION:
        if x.max() == x.min():
            raise ZeroVarianceError("zero variance: |Z| is constant")
        values = cov / cov[0]
    else:
        values = cov
    return AcfResult(np.arange(1, max_lag + 1), values[1:], normalization, float(values[0]))


def acf_rmse_percent(real: AcfResult, synth: AcfResult, normalized: bool = True) -> float:
    """Root-mean-square ACF difference in percent.

    Normalised mode divides by the root-mean-square of the *real* ACF, so
    it is not symmetric in its arguments; the unnormalised mode is
    ``100 * rmse`` and is.
    """
    if not np.array_equal(real.lags, synth.lags) or real.normalization != synth.normalization:
        raise ValueError("ACFs computed on different lag grids or normalizations")
    rmse = math.sqrt(float(np.mean((synth.values - real.values) ** 2)))
    if not normalized:
        return 100.0 * rmse
    scale = math.sqrt(float(np.mean(real.values ** 2)))
    if scale == 0.0:
        raise ZeroVarianceError("real ACF is identically zero")
    return 100.0 * rmse / scale


def accumulation_factor(series, t: int, tau: int) -> float:
    """``V[t + tau] / V[t]`` recovered from the log changes."""
    z = np.asarray(series, dtype=float)
    if t < 0 or tau < 0 or t + tau > len(z):
        raise IndexError(f"window [{t}, {t + tau}) outside a series of length {len(z)}")
    return math.exp(math.fsum(z[t:t + tau].tolist()))


@dataclass(frozen=True)
class FptResult:
    threshold: float
    start_rule: str
    passage_times: np.ndarray
    censored: np.ndarray
    survival: np.ndarray
    histogram: np.ndarray

    @property
    def censored_count(self) -> int:
        return int(self.censored.sum())

    @property
    def uncensored_times(self) -> np.ndarray:
        return self.passage_times[~self.censored]


def log_prefix_sums(series) -> np.ndarray:
    """``C[u] = Z[0] + ... + Z[u-1]``; ``log M_t(tau)`` is taken as ``C[t+tau] - C[t]``."""
    z = np.asarray(series, dtype=float)
    return np.concatenate([[0.0], np.cumsum(z)])


def _range_max_table(c: np.ndarray) -> list[np.ndarray]:
    table = [c]
    width = 1
    while 2 * width <= len(c):
        prev = table[-1]
        table.append(np.maximum(prev[:-width], prev[width:]))
        width *= 2
    return table


def _first_at_least(table: list[np.ndarray], start: np.ndarray, thr: np.ndarray) -> np.ndarray:
    """First position ``p >= start`` with ``c[p] >= thr`` (``len(c)`` if none), by binary lifting."""
    n = len(table[0])
    pos = start.copy()
    for level in range(len(table) - 1, -1, -1):
        width = 1 << level
        block = table[level]
        fits = pos + width <= n
        idx = np.where(fits, pos, 0)
        skip = fits & (block[np.minimum(idx, len(block) - 1)] < thr)
        pos = np.where(skip, pos + width, pos)
    return pos


def fpt_distribution(series, sigma: float, start_rule: str = EVERY_BAR) -> FptResult:
    """Empirical first-passage-time distribution of the accumulation factor.

    Every bar ``t`` is a start; the passage time is the smallest ``tau``
    with ``C[t+tau] - C[t] >= log(sigma)`` (see ``log_prefix_sums``).
    Starts that never reach the threshold are censored and excluded from
    ``survival``, which gives ``P[passage > tau]`` for ``tau = 0..max``.
    """
    if not sigma > 1.0:
        raise ValueError(f"threshold must exceed 1, got {sigma}")
    if start_rule != EVERY_BAR:
        raise ValueError(f"unknown start rule {start_rule!r}")
    c = log_prefix_sums(series)
    n = len(c) - 1
    level = math.log(sigma)
    starts = np.arange(n)
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return FptResult(sigma, start_rule, empty, np.zeros(0, dtype=bool), np.zeros(0), empty)

    # the range-max search uses a slightly lowered threshold so that it can
    # only stop early; candidates are then checked with the exact predicate
    slack = 8 * np.finfo(float).eps * (np.abs(c).max() + level)
    table = _range_max_table(c)
    hit = np.full(n, -1, dtype=np.int64)
    pending = starts
    search_from = starts + 1
    while pending.size:
        cand = _first_at_least(table, search_from, c[pending] + level - slack)
        found = cand <= n
        exact = np.zeros_like(found)
        exact[found] = c[cand[found]] - c[pending[found]] >= level
        hit[pending[exact]] = cand[exact] - pending[exact]
        retry = found & ~exact
        pending, search_from = pending[retry], cand[retry] + 1

    censored = hit < 0
    times = hit
    done = times[~censored]
    if done.size:
        histogram = np.bincount(done)
        survival = (done.size - np.cumsum(histogram)) / done.size
    else:
        histogram = np.zeros(0, dtype=np.int64)
        survival = np.zeros(0)
    return FptResult(sigma, start_rule, times, censored, survival, histogram)


def write_acf(result: AcfResult, path: str | Path, metadata: dict | None = None) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in (metadata or {}).items())
    rows = "".join(f"{lag},{value!r}\n" for lag, value in zip(result.lags.tolist(), result.values.tolist()))
    Path(path).write_text(header + "lag,value\n" + rows, encoding="utf-8")


def write_survival(result: FptResult, path: str | Path, metadata: dict | None = None) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in (metadata or {}).items())
    rows = "".join(f"{tau},{s!r}\n" for tau, s in enumerate(result.survival.tolist()))
    Path(path).write_text(header + "tau,survival\n" + rows, encoding="utf-8")


def write_histogram(result: FptResult, path: str | Path, metadata: dict | None = None) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in (metadata or {}).items())
    rows = "".join(f"{tau},{n}\n" for tau, n in enumerate(result.histogram.tolist()))
    Path(path).write_text(header + "tau,count\n" + rows, encoding="utf-8")
