"""Seeded synthetic data: tick files and ground-truth WISMC models.

Ground-truth models have 5 states, 5 index bins and sojourns in ``1..20``.
A higher index bin puts more mass on the extreme states and shortens stays
in the steady state, so volatility feeds on itself.  Two profiles ship:
``FAST`` (nearly every bar is a jump; many departures per cell, used for
recovery checks) and ``PERSISTENT`` (long sojourns; a large, slowly
decaying ``|Z|`` autocorrelation, used for ACF and lambda checks).

Probabilities are stored as integer weights over a common denominator,
which lets the model be simulated by the same integer inverse-CDF code as
a fitted kernel.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .discretization import IndexBinning, StateSpace, volume_state_space
from .index import IndexParams
from .ingestion import LogChangeSeries
from .kernel import KernelEstimate
from .simulation import SimulationConfig, simulate

WEIGHT_DENOMINATOR = 1_000_000
DEFAULT_LAMBDA = 0.97
DEFAULT_REPRESENTATIVES = (-5.5, -2.0, 0.0, 2.0, 5.5)
MAX_SOJOURN = 20


@dataclass(frozen=True)
class RegimeProfile:
    """Per-index-bin behaviour of a ground-truth kernel.

    ``extreme_probability[x]`` is the mass put on the two outer states
    (split evenly); of the rest, half goes to the steady state and a
    quarter to each moderate state, renormalised after removing the
    current state.  Sojourns are geometric with the given means,
    truncated to ``1..MAX_SOJOURN``.
    """

    extreme_probability: tuple[float, ...]
    steady_mean: tuple[float, ...]
    moderate_mean: float
    extreme_mean: float
    cut_points: tuple[float, ...]


# cut points of both profiles are their own stationary index quintiles
# (damped fixed point of cut -> simulate 1e6 bars -> quintiles)
# ~4.5e5 jumps per 5e5 bars, ~1e4 departures per cell
FAST = RegimeProfile(
    extreme_probability=(0.35, 0.40, 0.45, 0.50, 0.55),
    steady_mean=(1.3, 1.2375, 1.175, 1.1125, 1.05),
    moderate_mean=1.15,
    extreme_mean=1.05,
    cut_points=(11.76, 13.32, 14.72, 16.23),
)

# long sojourns and clustered volatility: a large, slowly decaying |Z| ACF
PERSISTENT = RegimeProfile(
    extreme_probability=(0.059, 0.101, 0.15, 0.22, 0.325),
    steady_mean=(18.9, 16.45, 14.0, 11.55, 9.1),
    moderate_mean=10.0,
    extreme_mean=6.0,
    cut_points=(2.92, 4.62, 7.25, 10.96),
)


@dataclass
class GroundTruthModel:
    """Explicit kernel ``weights[i, x, j, t - 1] / WEIGHT_DENOMINATOR``."""

    weights: np.ndarray
    lam: float
    state_space: StateSpace
    index_binning: IndexBinning
    initial_state: int = 2
    initial_index: float | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.int64)
        sums = self.weights.sum(axis=(2, 3))
        if (sums != WEIGHT_DENOMINATOR).any():
            raise ValueError("every cell of a ground-truth model must sum to one")
        k = self.state_space.size
        if any(self.weights[i, :, i].any() for i in range(k)):
            raise ValueError("ground-truth model contains self-transitions")

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / WEIGHT_DENOMINATOR

    def transition_probabilities(self) -> np.ndarray:
        """Total probability of each ``i -> j`` move per index bin, shape ``(K, X, K)``."""
        return self.weights.sum(axis=3) / WEIGHT_DENOMINATOR

    def as_kernel(self) -> KernelEstimate:
        index0 = self.initial_index
        if index0 is None:
            cuts = self.index_binning.cut_points
            index0 = cuts[len(cuts) // 2] if cuts else 0.0
        return KernelEstimate(self.state_space, self.index_binning, IndexParams(self.lam, 0.0), self.weights,
                              {"initial_state": self.initial_state, "median_index": float(index0)})


def _integer_weights(probs: np.ndarray) -> np.ndarray:
    """Scale a probability vector to integers summing to the denominator (largest remainder)."""
    scaled = probs / probs.sum() * WEIGHT_DENOMINATOR
    base = np.floor(scaled).astype(np.int64)
    short = WEIGHT_DENOMINATOR - int(base.sum())
    order = np.argsort(-(scaled - base), kind="stable")
    base[order[:short]] += 1
    return base


def _truncated_geometric(mean: float, support: int) -> np.ndarray:
    p = min(1.0, 1.0 / mean)
    t = np.arange(1, support + 1)
    mass = p * (1.0 - p) ** (t - 1)
    return mass / mass.sum()


def build_ground_truth(profile: RegimeProfile = FAST, lam: float = DEFAULT_LAMBDA,
                       representatives=DEFAULT_REPRESENTATIVES, cut_points=None,
                       max_sojourn: int = MAX_SOJOURN) -> GroundTruthModel:
    space = volume_state_space().with_representatives(representatives)
    binning = IndexBinning(tuple(profile.cut_points if cut_points is None else cut_points))
    k, nx = space.size, binning.size
    centre = k // 2
    weights = np.zeros((k, nx, k, max_sojourn), dtype=np.int64)
    for x in range(nx):
        extreme = profile.extreme_probability[x]
        target = np.array([extreme / 2, (1 - extreme) / 4, (1 - extreme) / 2, (1 - extreme) / 4, extreme / 2])
        for i in range(k):
            move = target.copy()
            move[i] = 0.0
            move /= move.sum()
            distance = abs(i - centre)
            mean = (profile.steady_mean[x], profile.moderate_mean, profile.extreme_mean)[distance]
            joint = np.outer(move, _truncated_geometric(mean, max_sojourn))
            weights[i, x] = _integer_weights(joint.ravel()).reshape(k, max_sojourn)
    return GroundTruthModel(weights, lam, space, binning)


def default_ground_truth() -> GroundTruthModel:
    return build_ground_truth(FAST)


def persistent_ground_truth(lam: float = DEFAULT_LAMBDA) -> GroundTruthModel:
    return build_ground_truth(PERSISTENT, lam=lam)


def single_bin_model(model: GroundTruthModel, index_bin: int = 0) -> GroundTruthModel:
    """Keep one index bin of ``model``: an ordinary semi-Markov model."""
    from .discretization import single_bin
    return GroundTruthModel(model.weights[:, index_bin:index_bin + 1], model.lam, model.state_space, single_bin(),
                            model.initial_state, 0.0)


def series_from_model(model: GroundTruthModel, length: int, seed: int, burn_in: int = 0) -> LogChangeSeries:
    cfg = SimulationConfig(seed=seed, horizon=length, burn_in=burn_in)
    run = simulate(model.as_kernel(), cfg)
    return LogChangeSeries(run.value_series, symbol=f"truth-{seed}")


def generate_ticks(profile: str, seed: int, days: int = 1, start: datetime = datetime(2007, 1, 2, 9, 0),
                   minutes_per_day: int = 510) -> str:
    """Tick CSV text (``timestamp,price,volume``) for a synthetic trading day.

    ``flat``: three ticks of volume 10 each minute, so every minute bar has
    volume 30.  ``bursty``: log-normal minute volumes with a wide spread
    plus forced spikes and lulls, so all five log-change states occur.
    """
    rng = np.random.default_rng(seed)
    out = io.StringIO()
    out.write("timestamp,price,volume\n")
    price = 17.25
    for day in range(days):
        session = start + timedelta(days=day)
        if profile == "flat":
            minute_volumes = np.full(minutes_per_day, 30, dtype=np.int64)
        elif profile == "bursty":
            raw = np.exp(rng.normal(6.0, 1.8, minutes_per_day))
            spikes = rng.choice(minutes_per_day, size=max(2, minutes_per_day // 40), replace=False)
            raw[spikes] *= 400.0
            minute_volumes = np.maximum(1, np.round(raw)).astype(np.int64)
            minute_volumes[0], minute_volumes[1], minute_volumes[2] = 20000, 10, 20000
        else:
            raise ValueError(f"unknown tick profile {profile!r}")
        for minute, volume in enumerate(minute_volumes.tolist()):
            n_ticks = 3 if profile == "flat" else int(rng.integers(1, 5))
            parts = _split_volume(volume, n_ticks, rng) if profile == "bursty" else [volume // 3] * 3
            seconds = sorted(rng.choice(60, size=len(parts), replace=False).tolist())
            for second, part in zip(seconds, parts):
                if profile == "bursty":
                    price = max(0.01, round(price * float(np.exp(rng.normal(0.0, 0.0005))), 4))
                stamp = session + timedelta(minutes=minute, seconds=second)
                out.write(f"{stamp.isoformat(sep=' ')},{price},{part}\n")
    return out.getvalue()


def _split_volume(volume: int, parts: int, rng: np.random.Generator) -> list[int]:
    parts = min(parts, volume)
    if parts <= 1:
        return [volume]
    cuts = np.sort(rng.choice(volume - 1, size=parts - 1, replace=False) + 1)
    return np.diff(np.concatenate([[0], cuts, [volume]])).tolist()
