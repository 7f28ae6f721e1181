"""State space, jump-chain extraction and index binning.

States are integers ``0..K-1`` in edge order; labels are only used for
display and serialization.  Bins are left-closed and right-open, so a
value sitting on an edge belongs to the upper bin.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateIndexError, UnvisitedStateError

VOLUME_EDGES = (-np.inf, -4.0, -1.0, 1.0, 4.0, np.inf)
VOLUME_LABELS = ("strong-drop", "drop", "steady", "rise", "strong-rise")
INDEX_LABELS = ("low", "medium-low", "medium", "medium-high", "high")


@dataclass(frozen=True)
class StateSpace:
    edges: tuple[float, ...]
    labels: tuple[str, ...]
    representatives: tuple[float, ...] | None = None

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if edges[0] != -np.inf or edges[-1] != np.inf:
            raise ValueError("state edges must start at -inf and end at +inf")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"state edges not strictly increasing: {edges}")
        if len(self.labels) != len(edges) - 1:
            raise ValueError("need exactly one label per bin")
        if self.representatives is not None:
            reps = tuple(float(r) for r in self.representatives)
            object.__setattr__(self, "representatives", reps)
            if len(reps) != self.size:
                raise ValueError("need exactly one representative per state")
            for k, r in enumerate(reps):
                if not edges[k] <= r < edges[k + 1]:
                    raise ValueError(f"representative {r} outside bin {k} [{edges[k]}, {edges[k + 1]})")

    @property
    def size(self) -> int:
        return len(self.labels)

    def values(self) -> np.ndarray:
        if self.representatives is None:
            raise ValueError("state space has no representatives yet")
        return np.asarray(self.representatives)

    def with_representatives(self, reps: Sequence[float]) -> "StateSpace":
        return replace(self, representatives=tuple(reps))

    def compatible_with(self, other: "StateSpace") -> bool:
        return self.edges == other.edges and self.labels == other.labels


def volume_state_space(edges: Sequence[float] = VOLUME_EDGES, labels: Sequence[str] | None = None) -> StateSpace:
    """Five-state space for minute log-volume changes, edges -4, -1, 1, 4."""
    if labels is None:
        labels = VOLUME_LABELS if len(edges) == len(VOLUME_EDGES) else tuple(f"s{k}" for k in range(len(edges) - 1))
    return StateSpace(tuple(edges), tuple(labels))


def discretize(values: Sequence[float] | np.ndarray, space: StateSpace) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise ValueError("cannot discretize NaN values")
    return np.searchsorted(np.asarray(space.edges), values, side="right") - 1


def representatives_from_data(values: Sequence[float] | np.ndarray, space: StateSpace) -> StateSpace:
    """Give each state the mean of the observed values falling in it."""
    values = np.asarray(values, dtype=float)
    states = discretize(values, space)
    counts = np.bincount(states, minlength=space.size)
    missing = [k for k in range(space.size) if counts[k] == 0]
    if missing:
        names = [space.labels[k] for k in missing]
        raise UnvisitedStateError(f"states never visited: {names}", missing)
    means = [float(np.mean(values[states == k])) for k in range(space.size)]
    return space.with_representatives(means)


@dataclass(frozen=True)
class MarkedTrajectory:
    """Jump chain ``(J_n, T_n)`` of a state series of ``length`` bars."""

    states: np.ndarray
    jump_times: np.ndarray
    length: int

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        times = np.asarray(self.jump_times, dtype=np.int64)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "jump_times", times)
        if len(states) != len(times):
            raise ValueError("states and jump_times differ in length")
        if len(times):
            if times[0] != 0:
                raise ValueError("first jump time must be 0")
            if (np.diff(times) <= 0).any():
                raise ValueError("jump times must be strictly increasing")
            if (np.diff(states) == 0).any():
                raise ValueError("consecutive states must differ")
            if self.length <= times[-1]:
                raise ValueError("length must exceed the last jump time")

    def __len__(self):
        return len(self.states)

    @property
    def sojourns(self) -> np.ndarray:
        """Completed sojourns ``T[n+1] - T[n]``; the final, censored one is excluded."""
        return np.diff(self.jump_times)

    def state_series(self) -> np.ndarray:
        """Step-function reconstruction, one state per bar."""
        if not len(self.states):
            return np.zeros(0, dtype=np.int64)
        widths = np.diff(np.append(self.jump_times, self.length))
        return np.repeat(self.states, widths)


def extract_trajectory(states: Sequence[int] | np.ndarray) -> MarkedTrajectory:
    states = np.asarray(states, dtype=np.int64)
    if states.size == 0:
        raise ValueError("empty state series")
    times = np.concatenate([[0], np.flatnonzero(states[1:] != states[:-1]) + 1])
    return MarkedTrajectory(states[times], times, len(states))


@dataclass(frozen=True)
class IndexBinning:
    cut_points: tuple[float, ...]
    labels: tuple[str, ...] = field(default=INDEX_LABELS)

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cut_points)
        object.__setattr__(self, "cut_points", cuts)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"index cut points not strictly increasing: {cuts}")
        if len(self.labels) != len(cuts) + 1:
            raise ValueError("need one label per index bin")

    @property
    def size(self) -> int:
        return len(self.cut_points) + 1

    def assign(self, values: Sequence[float] | np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.cut_points), np.asarray(values, dtype=float), side="right")

    def assign_one(self, value: float) -> int:
        return bisect.bisect_right(self.cut_points, value)


def single_bin() -> IndexBinning:
    """Binning with one cell; turns the WISMC kernel into a semi-Markov one."""
    return IndexBinning((), ("all",))


def fit_index_bins(index_values: Sequence[float] | np.ndarray, bin_count: int = 5) -> IndexBinning:
    """Cut index values at their empirical quantiles (linear interpolation).

    With five bins the cut points are the 20/40/60/80th percentiles.
    """
    values = np.asarray(index_values, dtype=float)
    distinct = np.unique(values).size
    if distinct <= 1:
        raise DegenerateIndexError("degenerate index: all index values are equal")
    if distinct < bin_count:
        raise DegenerateIndexError(f"degenerate index: {distinct} distinct values for {bin_count} bins")
    cuts = np.percentile(values, 100.0 * np.arange(1, bin_count) / bin_count)
    if (np.diff(cuts) <= 0).any():
        raise DegenerateIndexError(f"degenerate index: tied quantiles {cuts.tolist()}")
    labels = INDEX_LABELS if bin_count == len(INDEX_LABELS) else tuple(f"x{k}" for k in range(bin_count))
    return IndexBinning(tuple(cuts.tolist()), labels)
