import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_index
from wismc.discretization import MarkedTrajectory, extract_trajectory
from wismc.index import IndexParams, IndexTracker, compute_index, ewma_weight, index_series, normalizer


def test_ewma_weight_examples():
    assert ewma_weight(0.0, 5, 2, 0.8) == 0.0
    assert ewma_weight(2.0, 10, 7, 1.0) == pytest.approx(0.4, rel=1e-15)
    exact = Fraction(1) / (Fraction(9, 10) + Fraction(81, 100) + Fraction(729, 1000))
    assert ewma_weight(1.0, 3, 3, 0.9) == pytest.approx(float(exact), rel=1e-15)
    # the exact rational is 1000/2439
    assert ewma_weight(1.0, 3, 3, 0.9) == pytest.approx(0.4100041000410004, rel=1e-15)


def test_ewma_weight_domain():
    with pytest.raises(ValueError):
        ewma_weight(1.0, 0, 0, 0.9)
    with pytest.raises(ValueError):
        IndexParams(0.0)
    with pytest.raises(ValueError):
        IndexParams(1.5)


@given(st.integers(1, 2000), st.floats(0.01, 1.0))
def test_normalizer_closed_form(t, lam):
    assert normalizer(t, lam) == pytest.approx(math.fsum(lam ** a for a in range(1, t + 1)), rel=1e-12)


def test_zero_states_give_zero_index():
    traj = extract_trajectory([2, 1, 1, 2, 2, 2, 1])
    reps = [0.0, 0.0, 0.0]
    assert index_series(traj, reps, IndexParams(0.9)).values[1:].tolist() == [0.0] * (len(traj) - 1)


def test_single_state_uniform_weights():
    c, t1 = 3.0, 4
    traj = MarkedTrajectory(np.array([0, 1]), np.array([0, t1]), t1 + 2)
    assert compute_index(traj, [c, 1.0], IndexParams(1.0), 1) == pytest.approx(c * c, rel=1e-15)


def test_three_jump_fixture():
    traj = MarkedTrajectory(np.array([0, 1, 0]), np.array([0, 2, 5]), 6)
    reps = [1.0, -2.0]
    params = IndexParams(0.95)
    states = traj.state_series().tolist()
    expected = naive_index(states, reps, 0.95, 5)
    assert compute_index(traj, reps, params, 2) == pytest.approx(expected, rel=1e-12)
    assert index_series(traj, reps, params).values[2] == pytest.approx(expected, rel=1e-12)
    # hand expansion: (0.95^5 + 0.95^4 + 4 * (0.95^3 + 0.95^2 + 0.95)) / sum(0.95^a, a=1..5)
    hand = (0.95 ** 5 + 0.95 ** 4 + 4 * (0.95 ** 3 + 0.95 ** 2 + 0.95)) / sum(0.95 ** a for a in range(1, 6))
    assert expected == pytest.approx(hand, rel=1e-14)


def test_out_of_range_jump():
    traj = extract_trajectory([0, 1])
    with pytest.raises(IndexError):
        compute_index(traj, [1.0, 2.0], IndexParams(0.9), 2)


def test_single_state_trajectory_keeps_initial_index():
    traj = extract_trajectory([1, 1, 1])
    assert index_series(traj, [0.0, 2.0], IndexParams(0.9, initial_index=0.7)).values.tolist() == [0.7]


def test_constant_modulus_with_uniform_weights():
    traj = extract_trajectory([0, 1, 1, 0, 1, 0, 0, 0, 1])
    values = index_series(traj, [-2.5, 2.5], IndexParams(1.0)).values
    np.testing.assert_allclose(values[1:], 6.25, rtol=1e-14)


states_strategy = st.lists(st.integers(0, 4), min_size=2, max_size=120)
reps = [-5.5, -2.0, 0.0, 2.0, 5.5]


@settings(max_examples=150, deadline=None)
@given(states_strategy, st.floats(0.05, 1.0))
def test_incremental_equals_batch(states, lam):
    traj = extract_trajectory(states)
    params = IndexParams(lam)
    inc = index_series(traj, reps, params).values
    for n in range(len(traj)):
        batch = compute_index(traj, reps, params, n)
        assert abs(inc[n] - batch) <= 1e-12 * (1 + abs(batch))
        if n:
            assert batch == pytest.approx(naive_index(states, reps, lam, int(traj.jump_times[n])), rel=1e-12, abs=1e-300)


@settings(max_examples=150, deadline=None)
@given(states_strategy, st.floats(0.05, 1.0))
def test_index_is_bounded_convex_combination(states, lam):
    traj = extract_trajectory(states)
    values = index_series(traj, reps, IndexParams(lam)).values
    top = max(r * r for r in reps)
    assert (values >= 0).all()
    assert (values <= top * (1 + 1e-12)).all()


def test_tracker_accumulates():
    tracker = IndexTracker(IndexParams(0.5))
    tracker.advance(2.0, 1)
    assert tracker.value == pytest.approx(4.0)
    tracker.advance(0.0, 1)
    # weights 0.25 on the 4 and 0.5 on the 0, normalised by 0.75
    assert tracker.value == pytest.approx(4.0 / 3.0)
    assert tracker.time == 2
