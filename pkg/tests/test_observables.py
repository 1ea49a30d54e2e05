import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multispread import (
    EventLog, InitialCondition, RunConfig, Simulation, StopCondition, TimeSeries, compile_model, counts_on_grid,
    ensemble_mean, generate, read_log, sis, write_log,
)
from multispread.errors import AggregationError, ConsistencyError, ParseError
from multispread.observables import RangeError

from conftest import net

NAMES = ("S", "I")


def one_event_log(**kw):
    # node 0 infected at t=1; nodes 0..2 start susceptible
    return EventLog(NAMES, [0, 0, 0, 1], [1.0], [0], [0], [1], final_time=1.0, stop_reason="absorption", **kw)


def test_empty_log_grid_is_initial_counts():
    log = EventLog.empty(NAMES, [0, 1, 1], final_time=0.0)
    ts = counts_on_grid(log, [0.0, 5.0, 10.0])
    np.testing.assert_array_equal(ts.values, [[1, 2]] * 3)


def test_single_event_grid():
    ts = counts_on_grid(one_event_log(), [0.5, 1.5])
    np.testing.assert_array_equal(ts.values, [[3, 1], [2, 2]])


def test_event_at_grid_point_counts():
    ts = counts_on_grid(one_event_log(), [1.0])
    np.testing.assert_array_equal(ts.values, [[2, 2]])


def test_grid_beyond_horizon_is_range_error():
    log = EventLog(NAMES, [0, 1], [1.0], [0], [0], [1], final_time=2.0, stop_reason="max_time")
    counts_on_grid(log, [0.0, 2.0])
    with pytest.raises(RangeError):
        counts_on_grid(log, [0.0, 2.5])
    with pytest.raises(RangeError):
        counts_on_grid(log, [1.0, 0.5])


def simulated_log(events=10_000, seed=0, n=300):
    m = compile_model(sis(0.2, 0.3), net(generate("er", n, seed=seed, p=0.05)))
    c = RunConfig(InitialCondition.from_counts({"I": 30}, fill="S"), StopCondition(max_events=events), seed=seed)
    sim = Simulation(m, c)
    log = sim.run()
    return log, sim


def test_replay_matches_final_state():
    log, sim = simulated_log()
    assert len(log) == 10_000
    np.testing.assert_array_equal(log.replay(), sim.X)
    np.testing.assert_array_equal(log.final_counts(), sim.counts)


def test_replay_detects_inconsistent_record():
    log = EventLog(NAMES, [0, 0], [1.0, 2.0], [0, 0], [0, 0], [1, 1], 2.0, "absorption")
    with pytest.raises(ConsistencyError, match="record 1"):
        log.replay()


def test_grid_rows_sum_to_n():
    log, _ = simulated_log(events=2000)
    ts = counts_on_grid(log, np.linspace(0, log.final_time, 50))
    assert np.all(ts.values.sum(axis=1) == 300)


def test_ensemble_identity_and_mean():
    a = TimeSeries(np.array([0.0, 1.0]), np.array([[4, 0], [2, 2]]), NAMES, 4)
    b = TimeSeries(np.array([0.0, 1.0]), np.array([[2, 2], [0, 4]]), NAMES, 4)
    np.testing.assert_array_equal(ensemble_mean([a]).values, a.values / 4)
    mean = ensemble_mean([a, b])
    np.testing.assert_allclose(mean.values, (a.values + b.values) / 2 / 4)
    np.testing.assert_allclose(mean.std, np.std([a.values / 4, b.values / 4], axis=0, ddof=1))
    assert mean.runs == 2


def test_ensemble_grid_mismatch():
    a = TimeSeries(np.array([0.0, 1.0]), np.zeros((2, 2), int), NAMES, 4)
    b = TimeSeries(np.array([0.0, 2.0]), np.zeros((2, 2), int), NAMES, 4)
    with pytest.raises(AggregationError):
        ensemble_mean([a, b])
    with pytest.raises(AggregationError):
        ensemble_mean([])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 10), min_size=3, max_size=3), min_size=2, max_size=6), st.randoms())
def test_ensemble_mean_permutation_invariant(rows, rnd):
    grid = np.arange(3.0)
    series = [TimeSeries(grid, np.column_stack([r, 10 - np.array(r)]), NAMES, 10) for r in rows]
    shuffled = series[:]
    rnd.shuffle(shuffled)
    a, b = ensemble_mean(series), ensemble_mean(shuffled)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(a.values.sum(axis=1), 1.0, atol=1e-12)


def test_time_series_csv_round_trip(tmp_path):
    a = TimeSeries(np.array([0.0, 0.5]), np.array([[3, 1], [2, 2]]), NAMES, 4)
    a.to_csv(tmp_path / "a.csv")
    back = TimeSeries.from_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.values, a.values)
    m = ensemble_mean([a, a])
    m.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[1] == "t,S,I,S_std,I_std"
    back = TimeSeries.from_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values, m.values)
    np.testing.assert_array_equal(back.std, m.std)


def test_log_round_trip(tmp_path):
    log, _ = simulated_log(events=3000)
    write_log(log, tmp_path / "log.csv")
    back = read_log(tmp_path / "log.csv")
    assert back.digest() == log.digest()
    assert (back.seed, back.run, back.model_digest, back.stop_reason) == (log.seed, log.run, log.model_digest, "max_events")
    np.testing.assert_array_equal(back.times, log.times)


def test_empty_log_round_trip(tmp_path):
    log = EventLog.empty(NAMES, [0, 0, 0], final_time=0.0, seed=None)
    write_log(log, tmp_path / "e.csv")
    assert read_log(tmp_path / "e.csv").digest() == log.digest()


@pytest.mark.parametrize("cut", [-1, -5, -40])
def test_truncated_log_is_parse_error(tmp_path, cut):
    log, _ = simulated_log(events=200)
    write_log(log, tmp_path / "log.csv")
    data = (tmp_path / "log.csv").read_bytes()
    (tmp_path / "cut.csv").write_bytes(data[:cut])
    with pytest.raises(ParseError):
        read_log(tmp_path / "cut.csv")


def test_dropped_final_lines_is_parse_error(tmp_path):
    log, _ = simulated_log(events=200)
    write_log(log, tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines(keepends=True)
    (tmp_path / "cut.csv").write_text("".join(lines[:-3]))
    with pytest.raises(ParseError, match="byte"):
        read_log(tmp_path / "cut.csv")


def test_corrupt_record_reports_offset(tmp_path):
    log, _ = simulated_log(events=50)
    write_log(log, tmp_path / "log.csv")
    text = (tmp_path / "log.csv").read_text().replace(",", ";", 30)
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(ParseError) as info:
        read_log(tmp_path / "bad.csv")
    assert info.value.offset is not None and info.value.line is not None


def test_bad_magic(tmp_path):
    (tmp_path / "x.csv").write_text("time,node,from,to\n")
    with pytest.raises(ParseError, match="magic"):
        read_log(tmp_path / "x.csv")


@pytest.mark.slow
def test_million_record_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n, k = 1000, 1_000_000
    # a valid SIS trajectory: each record flips one node's state
    nodes = rng.integers(0, n, size=k)
    x = np.zeros(n, dtype=np.int64)
    src = np.empty(k, dtype=np.int64)
    for i, v in enumerate(nodes.tolist()):
        src[i] = x[v]
        x[v] ^= 1
    times = np.cumsum(rng.exponential(0.01, size=k))
    log = EventLog(NAMES, np.zeros(n, int), times, nodes, src, 1 - src, float(times[-1]), "max_events")
    write_log(log, tmp_path / "big.csv")
    back = read_log(tmp_path / "big.csv")
    assert back.digest() == log.digest()
    np.testing.assert_array_equal(back.replay(), x)
