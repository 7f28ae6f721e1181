import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wismc.discretization import IndexBinning, single_bin, volume_state_space
from wismc.errors import NoSupportError
from wismc.index import IndexParams, compute_index
from wismc.kernel import KernelEstimate, fit_model
from wismc.semimarkov import SemiMarkovKernel
from wismc.simulation import (
    DRAW_BLOCK,
    CellSampler,
    SimulationConfig,
    read_simulation,
    replication_rng,
    sample_cell,
    simulate,
    simulate_replications,
    write_simulation,
)

REPS = (-5.5, -2.0, 0.0, 2.0, 5.5)
SPACE = volume_state_space().with_representatives(REPS)


def kernel(cells, bins=None, max_sojourn=4):
    """``cells`` maps ``(i, x)`` to ``{(j, t): count}``."""
    binning = bins or single_bin()
    counts = np.zeros((5, binning.size, 5, max_sojourn), dtype=np.int64)
    for (i, x), outcomes in cells.items():
        for (j, t), c in outcomes.items():
            counts[i, x, j, t - 1] = c
    return KernelEstimate(SPACE, binning, IndexParams(0.9), counts)


def test_deterministic_alternation():
    model = kernel({(0, 0): {(1, 2): 1}, (1, 0): {(0, 2): 1}})
    run = simulate(model, SimulationConfig(seed=1, horizon=12, initial_state=0, initial_index=0.0))
    assert run.state_series.tolist() == [0, 0, 1, 1] * 3
    assert run.trajectory.jump_times.tolist() == [0, 2, 4, 6, 8, 10]


def test_horizon_one():
    model = kernel({(0, 0): {(1, 2): 1}, (1, 0): {(0, 2): 1}})
    run = simulate(model, SimulationConfig(seed=1, horizon=1, initial_state=1))
    assert run.state_series.tolist() == [1]
    assert len(run.trajectory) == 1


def test_sample_cell_examples():
    model = kernel({(0, 0): {(1, 1): 1, (2, 2): 3}, (3, 0): {(4, 3): 7}})
    assert sample_cell(model, 0, 0, 0.5) == (2, 2)
    assert sample_cell(model, 0, 0, 0.0) == (1, 1)
    assert sample_cell(model, 0, 0, 0.2499) == (1, 1)
    assert sample_cell(model, 0, 0, 0.25) == (2, 2)
    for u in (0.0, 0.3, 0.999999):
        assert sample_cell(model, 3, 0, u) == (4, 3)


@settings(max_examples=200)
@given(st.dictionaries(st.tuples(st.integers(1, 4), st.integers(1, 4)), st.integers(1, 50), min_size=1),
       st.floats(0.0, 1.0, exclude_max=True))
def test_sample_cell_matches_inverse_cdf_oracle(outcomes, u):
    model = kernel({(0, 0): outcomes})
    assert sample_cell(model, 0, 0, u) == oracles.inverse_cdf(outcomes, u)


def test_fallback_nearest_bin_ties_low():
    bins = IndexBinning((1.0, 2.0, 3.0, 4.0))
    model = kernel({(0, 1): {(1, 1): 1}, (0, 3): {(2, 1): 1}, (1, 0): {(0, 1): 1}, (2, 0): {(0, 1): 1}}, bins)
    assert sample_cell(model, 0, 2, 0.5) == (1, 1)
    assert sample_cell(model, 0, 4, 0.5) == (2, 1)
    with pytest.raises(NoSupportError):
        sample_cell(model, 0, 2, 0.5, fallback=False)
    with pytest.raises(NoSupportError):
        sample_cell(model, 4, 0, 0.5)


def test_fallback_is_logged():
    bins = IndexBinning((1.0,), ("lo", "hi"))
    model = kernel({(0, 0): {(1, 1): 1}, (1, 0): {(0, 1): 1}}, bins)
    sampler = CellSampler(model)
    for _ in range(3):
        sampler.sample(0, 1, 0.1)
    log = sampler.fallback_log()
    assert len(log) == 1
    assert (log[0].state, log[0].index_bin, log[0].rule, log[0].source_bin, log[0].uses) == (0, 1, "nearest-bin", 0, 3)


def test_replication_streams_follow_seed_sequence_spawn():
    children = np.random.SeedSequence(42).spawn(3)
    for r, child in enumerate(children):
        expected = np.random.Generator(np.random.PCG64(child)).random(5)
        assert np.array_equal(replication_rng(42, r).random(5), expected)


def fitted_model(seed=3):
    rng = np.random.default_rng(seed)
    return fit_model(rng.standard_t(3, size=20_000) * 2.5, 0.95, space=volume_state_space())


def test_same_seed_same_run_and_replications_differ():
    model = fitted_model()
    cfg = SimulationConfig(seed=5, horizon=3000, replication_count=3)
    a = simulate_replications(model, cfg)
    b = simulate_replications(model, cfg)
    for x, y in zip(a, b):
        assert np.array_equal(x.value_series, y.value_series)
    assert not np.array_equal(a[0].state_series, a[1].state_series)
    assert not np.array_equal(a[1].state_series, a[2].state_series)


def test_draws_consume_one_uniform_per_jump():
    model = fitted_model()
    cfg = SimulationConfig(seed=8, horizon=2000)
    rng = replication_rng(8, 0)
    uniforms = rng.random(4 * DRAW_BLOCK).tolist()
    assert np.array_equal(simulate(model, cfg, uniforms=uniforms).state_series, simulate(model, cfg).state_series)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 3000), st.integers(0, 200))
def test_run_invariants(seed, horizon, burn_in):
    model = fitted_model()
    run = simulate(model, SimulationConfig(seed=seed, horizon=horizon, burn_in=burn_in))
    traj = run.trajectory
    assert len(run.state_series) == horizon
    assert np.array_equal(traj.state_series()[burn_in:], run.state_series)
    assert (np.diff(traj.jump_times) > 0).all() and (np.diff(traj.states) != 0).all()
    np.testing.assert_array_equal(run.value_series, model.state_space.values()[run.state_series])


def test_index_history_matches_batch():
    model = fitted_model()
    run = simulate(model, SimulationConfig(seed=2, horizon=5000))
    params = IndexParams(model.lam, run.index_history.values[0])
    reps = model.state_space.values()
    for n in range(1, len(run.trajectory)):
        batch = compute_index(run.trajectory, reps, params, n)
        assert abs(run.index_history.values[n] - batch) <= 1e-12 * (1 + abs(batch))


def test_single_bin_path_equals_classical():
    model = fitted_model()
    merged = KernelEstimate(model.state_space, single_bin(), model.params,
                            model.counts.sum(axis=1, keepdims=True), model.fit_info)
    classic = SemiMarkovKernel(5, merged.max_sojourn)
    classic.counts = merged.counts[:, 0].copy()
    uniforms = np.random.default_rng(0).random(20_000).tolist()
    ours = simulate(merged, SimulationConfig(seed=0, horizon=10_000, initial_state=2), uniforms=uniforms).trajectory
    theirs = classic.simulate(2, 10_000, uniforms)
    assert np.array_equal(ours.states, theirs.states) and np.array_equal(ours.jump_times, theirs.jump_times)


def test_initial_conditions_default_to_fit_info():
    model = fitted_model()
    run = simulate(model, SimulationConfig(seed=0, horizon=10))
    assert run.state_series[0] == model.fit_info["initial_state"]
    assert run.index_history.values[0] == model.fit_info["median_index"]


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(seed=0, horizon=0)
    with pytest.raises(ValueError):
        SimulationConfig(seed=0, horizon=5, burn_in=-1)


def test_write_and_read(tmp_path):
    model = fitted_model()
    run = simulate(model, SimulationConfig(seed=0, horizon=50))
    path = tmp_path / "s.csv"
    write_simulation(run, path, {"seed": 0})
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# seed: 0", "t,state,value"]
    states, values = read_simulation(path)
    assert np.array_equal(states, run.state_series) and np.array_equal(values, run.value_series)
