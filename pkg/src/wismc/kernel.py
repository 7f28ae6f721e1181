"""Counting estimator of the weighted-indexed semi-Markov kernel.

``counts[i, x, j, t - 1]`` is the number of departures from state ``i``
while the index sat in bin ``x`` that went to state ``j`` after a sojourn
of ``t`` bars.  The kernel estimate is the cumulative ratio

    Q[i, j](x; t) = sum(counts[i, x, j, :t]) / sum(counts[i, x])

Sojourns longer than ``max_sojourn`` are pooled into the last bucket.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discretization import (
    IndexBinning,
    MarkedTrajectory,
    StateSpace,
    discretize,
    extract_trajectory,
    fit_index_bins,
    representatives_from_data,
    volume_state_space,
)
from .errors import FitError, NoSupportError
from .index import IndexParams, IndexSeries, index_series
from .ingestion import LogChangeSeries

logger = logging.getLogger(__name__)

SOJOURN_CAP_PERCENTILE = 99.5


@dataclass
class KernelEstimate:
    state_space: StateSpace
    index_binning: IndexBinning
    params: IndexParams
    counts: np.ndarray
    fit_info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k, x = self.state_space.size, self.index_binning.size
        if self.counts.ndim != 4 or self.counts.shape[:3] != (k, x, k):
            raise ValueError(f"counts shape {self.counts.shape} does not match ({k}, {x}, {k}, max_sojourn)")
        if (self.counts < 0).any():
            raise ValueError("negative transition counts")
        if any(self.counts[i, :, i].any() for i in range(k)):
            raise ValueError("self-transitions are not allowed in a jump chain kernel")

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def max_sojourn(self) -> int:
        return self.counts.shape[3]

    @property
    def visit_counts(self) -> np.ndarray:
        """``N_i(x)``, shape ``(K, X)``."""
        return self.counts.sum(axis=(2, 3))

    @property
    def support_report(self) -> list[tuple[int, int]]:
        """Cells ``(i, x)`` with no observed departures."""
        return [tuple(int(v) for v in cell) for cell in np.argwhere(self.visit_counts == 0)]

    def kernel_at(self, i: int, x: int, j: int, t: int) -> float:
        visits = int(self.counts[i, x].sum())
        if visits == 0:
            raise NoSupportError(i, x)
        if t < 1:
            return 0.0
        return int(self.counts[i, x, j, :t].sum()) / visits

    def transition_probabilities(self) -> np.ndarray:
        """``Q[i, j](x; inf)`` as an array ``(K, X, K)``; NaN rows where unvisited."""
        totals = self.counts.sum(axis=3).astype(float)
        visits = totals.sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return totals / visits

    def merged(self, other: "KernelEstimate") -> "KernelEstimate":
        if self.counts.shape != other.counts.shape:
            raise ValueError("cannot merge estimates of different shape")
        return KernelEstimate(self.state_space, self.index_binning, self.params,
                              self.counts + other.counts, dict(self.fit_info))


def sojourn_cap(sojourns: np.ndarray) -> int:
    if len(sojourns) == 0:
        return 1
    return max(1, int(np.ceil(np.percentile(sojourns, SOJOURN_CAP_PERCENTILE))))


def count_transitions(traj: MarkedTrajectory, idx: IndexSeries, binning: IndexBinning, state_space: StateSpace,
                      max_sojourn: int | None = None) -> KernelEstimate:
    if len(idx) != max(len(traj), 1):
        raise ValueError(f"index series has {len(idx)} values for {len(traj)} jumps")
    sojourns = traj.sojourns
    cap = max_sojourn if max_sojourn is not None else sojourn_cap(sojourns)
    k, nx = state_space.size, binning.size
    counts = np.zeros((k, nx, k, cap), dtype=np.int64)
    if len(sojourns):
        origin = traj.states[:-1]
        target = traj.states[1:]
        bins = binning.assign(idx.values[:-1])
        buckets = np.minimum(sojourns, cap) - 1
        flat = np.ravel_multi_index((origin, bins, target, buckets), counts.shape)
        counts = np.bincount(flat, minlength=counts.size).reshape(counts.shape).astype(np.int64)
    return KernelEstimate(state_space, binning, idx.params, counts)


def fit_model(series: LogChangeSeries | Sequence[float] | np.ndarray, lam: float,
              space: StateSpace | None = None, binning: IndexBinning | None = None, bin_count: int = 5,
              max_sojourn: int | None = None, initial_index: float = 0.0) -> KernelEstimate:
    """Discretize, compute the index, bin it and count transitions.

    When ``binning`` is omitted the index is cut at its empirical quantiles
    (the initial index value is left out of the quantile fit).  A space
    without representatives gets the per-state means of ``series``.
    """
    values = series.values if isinstance(series, LogChangeSeries) else np.asarray(series, dtype=float)
    space = space or volume_state_space()
    states = discretize(values, space)
    traj = extract_trajectory(states)
    if len(traj) < 3:
        raise FitError(f"series has {len(traj) - 1} jumps; at least 2 are needed to fit")
    if space.representatives is None:
        space = representatives_from_data(values, space)
    params = IndexParams(lam, initial_index)
    idx = index_series(traj, space.values(), params)
    if binning is None:
        binning = fit_index_bins(idx.values[1:], bin_count)
    est = count_transitions(traj, idx, binning, space, max_sojourn)
    occupancy = np.bincount(states, minlength=space.size)
    est.fit_info = {
        "n_bars": int(len(values)),
        "n_jumps": int(len(traj) - 1),
        "initial_state": int(np.argmax(occupancy)),
        "median_index": float(np.median(idx.values[1:])),
        "occupancy": occupancy.tolist(),
    }
    if est.support_report:
        logger.info("%d kernel cells without support: %s", len(est.support_report), est.support_report)
    return est
