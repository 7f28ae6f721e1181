"""Classical (index-free) discrete-time semi-Markov chain.

Kept deliberately separate from the WISMC code so it can serve as a
reference: a WISMC model with a single index bin must reproduce this
estimator cell for cell, and its simulator path for path.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .discretization import MarkedTrajectory


class SemiMarkovKernel:
    def __init__(self, n_states: int, max_sojourn: int):
        self.counts = np.zeros((n_states, n_states, max_sojourn), dtype=np.int64)

    @classmethod
    def fit(cls, traj: MarkedTrajectory, n_states: int, max_sojourn: int) -> "SemiMarkovKernel":
        kernel = cls(n_states, max_sojourn)
        states = traj.states.tolist()
        times = traj.jump_times.tolist()
        for n in range(len(states) - 1):
            sojourn = min(times[n + 1] - times[n], max_sojourn)
            kernel.counts[states[n], states[n + 1], sojourn - 1] += 1
        return kernel

    def visits(self, i: int) -> int:
        return int(self.counts[i].sum())

    def q(self, i: int, j: int, t: int) -> float:
        """``P[next = j, sojourn <= t | current = i]``; NaN for a state never left."""
        visits = self.visits(i)
        if visits == 0:
            return float("nan")
        return int(self.counts[i, j, :max(t, 0)].sum()) / visits

    def draw(self, i: int, u: float) -> tuple[int, int]:
        target = u * self.visits(i)
        running = 0
        n_states, max_sojourn = self.counts.shape[1:]
        for j in range(n_states):
            for t in range(max_sojourn):
                running += int(self.counts[i, j, t])
                if running > target:
                    return j, t + 1
        raise ValueError(f"state {i} has no observed departures")

    def simulate(self, initial_state: int, horizon: int, uniforms: Iterable[float]) -> MarkedTrajectory:
        draws = iter(uniforms)
        state, now = initial_state, 0
        states, times = [state], [0]
        while True:
            nxt, sojourn = self.draw(state, next(draws))
            if now + sojourn >= horizon:
                break
            now += sojourn
            state = nxt
            states.append(state)
            times.append(now)
        return MarkedTrajectory(np.array(states), np.array(times), horizon)
