import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wismc.discretization import (
    VOLUME_EDGES,
    IndexBinning,
    MarkedTrajectory,
    StateSpace,
    discretize,
    extract_trajectory,
    fit_index_bins,
    representatives_from_data,
    single_bin,
    volume_state_space,
)
from wismc.errors import DegenerateIndexError, UnvisitedStateError

SPACE = volume_state_space()


def scan_state(v, edges):
    for k in range(len(edges) - 1):
        if edges[k] <= v < edges[k + 1]:
            return k
    raise AssertionError(v)


def test_default_edges():
    assert SPACE.edges == (-np.inf, -4.0, -1.0, 1.0, 4.0, np.inf)
    assert SPACE.size == 5


@pytest.mark.parametrize("value, state", [(0.0, 2), (-7.3, 0), (1.0, 3), (-1.0, 2), (-4.0, 1), (4.0, 4), (3.99, 3)])
def test_discretize_examples(value, state):
    assert discretize([value], SPACE).tolist() == [state]


@settings(max_examples=200)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=50))
def test_discretize_matches_scan(values):
    assert discretize(values, SPACE).tolist() == [scan_state(v, VOLUME_EDGES) for v in values]


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_discretize_monotone(a, b):
    lo, hi = sorted((a, b))
    s = discretize([lo, hi], SPACE)
    assert s[0] <= s[1]


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=300))
def test_occupancy_sums_to_length(values):
    assert np.bincount(discretize(values, SPACE), minlength=5).sum() == len(values)


def test_bad_edges():
    with pytest.raises(ValueError):
        StateSpace((-np.inf, 1.0, 1.0, np.inf), ("a", "b", "c"))
    with pytest.raises(ValueError):
        StateSpace((0.0, 1.0, np.inf), ("a", "b"))


def test_extract_examples():
    t = extract_trajectory([0, 0, 0])
    assert t.states.tolist() == [0] and t.jump_times.tolist() == [0]
    t = extract_trajectory([0, 1, 1, 0])
    assert t.states.tolist() == [0, 1, 0] and t.jump_times.tolist() == [0, 1, 3]
    t = extract_trajectory([0, 1, 0, 1])
    assert len(t) == 4 and t.sojourns.tolist() == [1, 1, 1]


@settings(max_examples=200)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=200))
def test_trajectory_round_trip(states):
    traj = extract_trajectory(states)
    assert traj.state_series().tolist() == states
    assert (np.diff(traj.states) != 0).all()


def test_trajectory_invariants_enforced():
    with pytest.raises(ValueError):
        MarkedTrajectory(np.array([0, 0]), np.array([0, 2]), 4)
    with pytest.raises(ValueError):
        MarkedTrajectory(np.array([0, 1]), np.array([0, 0]), 4)
    with pytest.raises(ValueError):
        MarkedTrajectory(np.array([0, 1]), np.array([0, 3]), 3)


def test_quintiles_of_1_to_100():
    bins = fit_index_bins(np.arange(1, 101))
    np.testing.assert_allclose(bins.cut_points, (20.8, 40.6, 60.4, 80.2), rtol=1e-12)


def percentile_oracle(values, q):
    """Linear interpolation between order statistics at position q * (n - 1)."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


@settings(max_examples=100)
@given(st.lists(st.floats(0, 100), min_size=10, max_size=200, unique=True))
def test_quintiles_match_sort_oracle(values):
    bins = fit_index_bins(values)
    expected = [percentile_oracle(values, q) for q in (0.2, 0.4, 0.6, 0.8)]
    np.testing.assert_allclose(bins.cut_points, expected, rtol=1e-9, atol=1e-12)


def test_degenerate_index():
    with pytest.raises(DegenerateIndexError, match="degenerate index"):
        fit_index_bins([3.0] * 10)
    with pytest.raises(DegenerateIndexError):
        fit_index_bins([1.0, 2.0, 3.0])


def test_five_values_five_bins():
    bins = fit_index_bins([1, 2, 3, 4, 5])
    assert bins.assign([1, 2, 3, 4, 5]).tolist() == [0, 1, 2, 3, 4]


def test_quantile_balance():
    rng = np.random.default_rng(5)
    for sample in (rng.exponential(size=20_000), rng.lognormal(0, 2, size=10_000), rng.uniform(size=10_000)):
        shares = np.bincount(fit_index_bins(sample).assign(sample), minlength=5) / len(sample)
        assert ((shares >= 0.15) & (shares <= 0.25)).all()


@given(st.floats(-1e6, 1e6))
def test_every_value_has_one_bin(v):
    bins = IndexBinning((1.0, 2.0, 3.0, 4.0))
    assert bins.assign([v])[0] == bins.assign_one(v)
    assert 0 <= bins.assign_one(v) < 5


def test_single_bin():
    b = single_bin()
    assert b.size == 1 and b.assign([0.0, 1e9]).tolist() == [0, 0]


def test_representatives():
    values = [-0.5, 0.5, 5.0, 6.0, 7.0, -2.0, -6.0, 2.0]
    reps = representatives_from_data(values, SPACE).representatives
    assert reps[2] == 0.0 and reps[4] == 6.0


def test_representatives_groupby_oracle():
    rng = np.random.default_rng(2)
    values = np.concatenate([rng.uniform(-9, 9, size=15), [-5.0, -2.0, 0.0, 2.0, 5.0]])
    groups: dict = {}
    for v in values.tolist():
        groups.setdefault(scan_state(v, VOLUME_EDGES), []).append(v)
    reps = representatives_from_data(values, SPACE).representatives
    for k in range(5):
        assert reps[k] == pytest.approx(sum(groups[k]) / len(groups[k]), rel=1e-12)


def test_unvisited_state():
    with pytest.raises(UnvisitedStateError) as info:
        representatives_from_data([0.0, 0.3, 2.0], SPACE)
    assert info.value.states == [0, 1, 4]


def test_representatives_must_lie_in_bins():
    with pytest.raises(ValueError):
        SPACE.with_representatives((0.0, 0.0, 0.0, 0.0, 0.0))
