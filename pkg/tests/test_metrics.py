import pytest

from relaysim.experiments import run_single
from relaysim.metrics import read_trace_csv, validate_trace
from conftest import desk_config


@pytest.fixture(scope="module")
def trace():
    return run_single(desk_config(), seed=0)


def test_csv_round_trip_preserves_rows(tmp_path, trace):
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    loaded = read_trace_csv(path)
    assert len(loaded.rows) == len(trace.rows)
    assert loaded.rows[-1] == trace.rows[-1]
    assert loaded.to_csv_text() == trace.to_csv_text()


def test_validator_accepts_engine_output(trace):
    assert validate_trace(trace) == []


def test_validator_catches_capacity_leak(trace):
    import copy

    broken = copy.deepcopy(trace)
    broken.rows[3].local_left += 1.0
    problems = validate_trace(broken)
    assert any("capacity" in p for p in problems)


def test_validator_catches_identity_break(trace):
    import copy

    broken = copy.deepcopy(trace)
    broken.rows[-1].cum_lost_fees += 5.0
    problems = validate_trace(broken)
    assert any("identity" in p for p in problems)


def test_validator_catches_nonmonotone_cumulative(trace):
    import copy

    broken = copy.deepcopy(trace)
    # Earned relay fees are not part of the stepwise identity, so zeroing the
    # cumulative column trips only the monotonicity check.
    broken.rows[-1].cum_relay_fees = 0.0
    problems = validate_trace(broken)
    assert any("decreased" in p for p in problems)


def test_cumulative_columns_monotone(trace):
    rows = trace.rows
    for prev, row in zip(rows, rows[1:]):
        assert row.cum_relay_fees >= prev.cum_relay_fees
        assert row.cum_lost_fees >= prev.cum_lost_fees
        assert row.cum_swap_fees >= prev.cum_swap_fees
        assert row.cum_arrival_fees >= prev.cum_arrival_fees
        assert row.cum_failed_swaps >= prev.cum_failed_swaps
