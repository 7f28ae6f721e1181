"""EWMA-of-squares index along a jump chain.

At jump ``n`` the index is the exponentially weighted mean of the squared
state values over bars ``0 .. T_n - 1``.  The bar at ``a`` carries weight
``lam ** (T_n - a)`` and the weights are normalised by
``sum(lam ** b for b in 1..T_n)``, which is exactly their total, so the
index is a convex combination of squared state values.

``index_series`` uses the recursion

    S(T + d) = lam**d * S(T) + c**2 * norm(d)

for the unnormalised sum ``S`` over a sojourn of ``d`` bars in a state of
value ``c``; ``compute_index`` evaluates the double sum directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretization import MarkedTrajectory

EWMA_OF_SQUARES = "ewma_of_squares"


@dataclass(frozen=True)
class IndexParams:
    lam: float
    initial_index: float = 0.0
    functional: str = EWMA_OF_SQUARES

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.functional != EWMA_OF_SQUARES:
            raise ValueError(f"unsupported index functional {self.functional!r}")


@dataclass(frozen=True)
class IndexSeries:
    values: np.ndarray
    params: IndexParams

    def __len__(self):
        return len(self.values)


def normalizer(t_n: int, lam: float) -> float:
    """``sum(lam ** a for a in 1..t_n)`` in closed form."""
    if t_n < 1:
        raise ValueError(f"normalizer needs t_n >= 1, got {t_n}")
    if lam == 1.0:
        return float(t_n)
    # -expm1 keeps 1 - lam**t_n accurate when lam is close to 1
    return lam * -math.expm1(t_n * math.log(lam)) / (1.0 - lam)


def ewma_weight(state_value: float, t_n: int, a: int, lam: float) -> float:
    if t_n < 1:
        raise ValueError(f"t_n must be >= 1, got {t_n}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    return lam ** (t_n - a) * state_value ** 2 / normalizer(t_n, lam)


def compute_index(traj: MarkedTrajectory, state_values, params: IndexParams, n: int) -> float:
    """Index at jump ``n`` by direct summation over every past bar."""
    if not 0 <= n < len(traj):
        raise IndexError(f"jump {n} out of range for a trajectory with {len(traj)} jumps")
    if n == 0:
        return float(params.initial_index)
    t_n = int(traj.jump_times[n])
    squares = np.asarray(state_values, dtype=float)[traj.states[:n]] ** 2
    widths = np.diff(traj.jump_times[: n + 1])
    per_bar = np.repeat(squares, widths)
    weights = params.lam ** (t_n - np.arange(t_n, dtype=float))
    return float(np.dot(weights, per_bar) / normalizer(t_n, params.lam))


class IndexTracker:
    """Incremental evaluator; feed it each completed sojourn in order."""

    def __init__(self, params: IndexParams):
        self.lam = params.lam
        self.total = 0.0
        self.time = 0
        self.value = float(params.initial_index)

    def advance(self, state_value: float, duration: int) -> float:
        lam = self.lam
        self.total = lam ** duration * self.total + state_value * state_value * normalizer(duration, lam)
        self.time += duration
        self.value = self.total / normalizer(self.time, lam)
        return self.value


def index_series(traj: MarkedTrajectory, state_values, params: IndexParams) -> IndexSeries:
    """Index at every jump of ``traj``, in O(number of jumps)."""
    values = np.empty(max(len(traj), 1))
    values[0] = params.initial_index
    reps = np.asarray(state_values, dtype=float)
    tracker = IndexTracker(params)
    for n, (state, duration) in enumerate(zip(traj.states[:-1].tolist(), traj.sojourns.tolist()), start=1):
        values[n] = tracker.advance(float(reps[state]), duration)
    return IndexSeries(values, params)
