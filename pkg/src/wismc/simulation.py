"""Monte Carlo synthesis of log-volume-change series from a fitted kernel.

Draw protocol (fixed, so runs are reproducible across platforms):

* replication ``r`` of seed ``s`` uses ``numpy.random.Generator(PCG64(SeedSequence(s, spawn_key=(r,))))``,
  i.e. the ``r``-th child of ``SeedSequence(s).spawn``;
* each jump consumes exactly one uniform from ``Generator.random``;
* the uniform ``u`` selects, by inverse CDF, an outcome of the current
  cell ``(i, x)`` with outcomes ordered by next state ``j`` and then by
  sojourn ``t`` ascending: the first outcome whose cumulative count
  exceeds ``u * N_i(x)``.

A cell without support falls back to the nearest index bin with support
for the same state (ties go to the lower bin) and, failing that, to the
state's index-marginal distribution.  Each fallback use is tallied in
``SimulationRun.fallback_log``.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from .discretization import MarkedTrajectory
from .errors import FormatError, NoSupportError
from .index import IndexParams, IndexSeries, IndexTracker
from .kernel import KernelEstimate

DRAW_BLOCK = 4096


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    horizon: int
    initial_state: int | None = None
    initial_index: float | None = None
    replication_count: int = 1
    burn_in: int = 0
    fallback: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1 bar")
        if self.replication_count < 1:
            raise ValueError("replication_count must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


@dataclass(frozen=True)
class FallbackRecord:
    state: int
    index_bin: int
    rule: str
    source_bin: int | None
    uses: int


@dataclass
class SimulationRun:
    state_series: np.ndarray
    value_series: np.ndarray
    trajectory: MarkedTrajectory
    index_history: IndexSeries
    fallback_log: list[FallbackRecord] = field(default_factory=list)
    seed: int | None = None
    replication: int = 0


def replication_rng(seed: int, replication: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def _uniform_stream(rng: np.random.Generator) -> Iterator[float]:
    while True:
        yield from rng.random(DRAW_BLOCK).tolist()


@dataclass
class _Cell:
    cumulative: list[int]
    outcomes: list[tuple[int, int]]

    @property
    def total(self) -> int:
        return self.cumulative[-1] if self.cumulative else 0

    def draw(self, u: float) -> tuple[int, int]:
        return self.outcomes[bisect.bisect_right(self.cumulative, u * self.total)]


def _build_cell(counts: np.ndarray) -> _Cell:
    """``counts`` has shape ``(K, max_sojourn)``; only non-zero outcomes are kept."""
    js, ts = np.nonzero(counts)
    cumulative = np.cumsum(counts[js, ts]).tolist()
    return _Cell(cumulative, [(int(j), int(t) + 1) for j, t in zip(js, ts)])


class CellSampler:
    """Inverse-CDF sampler over the cells of a fitted kernel."""

    def __init__(self, model: KernelEstimate, fallback: bool = True):
        self.model = model
        self.fallback = fallback
        k, nx = model.state_space.size, model.index_binning.size
        self._cells = [[_build_cell(model.counts[i, x]) for x in range(nx)] for i in range(k)]
        self._marginal = [_build_cell(model.counts[i].sum(axis=0)) for i in range(k)]
        self._resolved: dict[tuple[int, int], tuple[_Cell, str, int | None]] = {}
        self.fallback_uses: Counter = Counter()

    def _resolve(self, i: int, x: int) -> tuple[_Cell, str, int | None]:
        cell = self._cells[i][x]
        if cell.total:
            return cell, "", None
        if not self.fallback:
            raise NoSupportError(i, x)
        supported = [b for b, c in enumerate(self._cells[i]) if c.total]
        if supported:
            nearest = min(supported, key=lambda b: (abs(b - x), b))
            return self._cells[i][nearest], "nearest-bin", nearest
        if self._marginal[i].total:
            return self._marginal[i], "index-marginal", None
        raise NoSupportError(i, x)

    def sample(self, i: int, x: int, u: float) -> tuple[int, int]:
        key = (i, x)
        if key not in self._resolved:
            self._resolved[key] = self._resolve(i, x)
        cell, rule, _ = self._resolved[key]
        if rule:
            self.fallback_uses[key] += 1
        return cell.draw(u)

    def fallback_log(self) -> list[FallbackRecord]:
        return [FallbackRecord(i, x, self._resolved[(i, x)][1], self._resolved[(i, x)][2], n)
                for (i, x), n in sorted(self.fallback_uses.items())]


def sample_cell(model: KernelEstimate, i: int, x: int, u: float, fallback: bool = True) -> tuple[int, int]:
    """Draw ``(next_state, sojourn)`` from cell ``(i, x)`` for a uniform ``u`` in [0, 1)."""
    return CellSampler(model, fallback).sample(i, x, u)


def initial_conditions(model: KernelEstimate, cfg: SimulationConfig) -> tuple[int, float]:
    state = cfg.initial_state
    if state is None:
        state = model.fit_info.get("initial_state")
    if state is None:
        state = int(np.argmax(model.visit_counts.sum(axis=1)))
    if not 0 <= state < model.state_space.size:
        raise ValueError(f"initial state {state} not in the state space")
    index = cfg.initial_index
    if index is None:
        index = model.fit_info.get("median_index", model.params.initial_index)
    return int(state), float(index)


def simulate(model: KernelEstimate, cfg: SimulationConfig, replication: int = 0,
             uniforms: Iterable[float] | None = None) -> SimulationRun:
    """Run the chain for ``cfg.burn_in + cfg.horizon`` bars.

    The last sojourn is cut at the horizon.  ``uniforms`` replaces the
    seeded generator, which lets two simulators share one draw sequence.
    """
    state, index0 = initial_conditions(model, cfg)
    draws = iter(uniforms) if uniforms is not None else _uniform_stream(replication_rng(cfg.seed, replication))
    sampler = CellSampler(model, cfg.fallback)
    reps = model.state_space.values().tolist()
    params = IndexParams(model.lam, index0)
    tracker = IndexTracker(params)
    assign = model.index_binning.assign_one
    length = cfg.burn_in + cfg.horizon

    states, times, history = [state], [0], [index0]
    now, index = 0, index0
    while True:
        nxt, sojourn = sampler.sample(state, assign(index), next(draws))
        if now + sojourn >= length:
            break
        index = tracker.advance(reps[state], sojourn)
        now += sojourn
        state = nxt
        states.append(state)
        times.append(now)
        history.append(index)

    traj = MarkedTrajectory(np.array(states), np.array(times), length)
    full = traj.state_series()
    kept = full[cfg.burn_in:]
    return SimulationRun(
        state_series=kept,
        value_series=np.asarray(reps)[kept],
        trajectory=traj,
        index_history=IndexSeries(np.array(history), params),
        fallback_log=sampler.fallback_log(),
        seed=cfg.seed,
        replication=replication,
    )


def simulate_replications(model: KernelEstimate, cfg: SimulationConfig) -> list[SimulationRun]:
    return [simulate(model, cfg, r) for r in range(cfg.replication_count)]


def write_simulation(run: SimulationRun, path: str | Path, metadata: dict | None = None) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in (metadata or {}).items())
    body = "".join(f"{t},{s},{v!r}\n" for t, (s, v) in
                   enumerate(zip(run.state_series.tolist(), run.value_series.tolist())))
    Path(path).write_text(header + "t,state,value\n" + body, encoding="utf-8")


def read_simulation(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(states, values)`` from a ``t,state,value`` file."""
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    missing = {"state", "value"} - set(frame.columns)
    if missing:
        raise FormatError(f"{path}: missing columns {sorted(missing)}")
    return frame["state"].to_numpy(dtype=np.int64), frame["value"].to_numpy(dtype=float)
