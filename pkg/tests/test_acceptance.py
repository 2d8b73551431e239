"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are fixed here and not tunable from outside.
"""

import math
import time

import numpy as np
import pytest

from relaysim.bridge import CallbackTransport, replay_policy, serve
from relaysim.experiments import (
    profitability_thresholds,
    run_depletion_scenario,
    run_experiment,
    run_single,
)
from relaysim.metrics import validate_trace
from relaysim.model import FeeSchedule
from relaysim.policies import (
    AutoloopParams,
    LoopmaxParams,
    RawAction,
    decide_autoloop,
    decide_loopmax,
)
from conftest import desk_config
from policy_fixtures import AUTOLOOP_CASES, LOOPMAX_CASES, autoloop_context, loopmax_context
from test_bridge import ScriptedAgent
from test_policies import _random_context, assert_decision, check_raw_action_constraints

IDENTITY_RTOL = 1e-9


def _stepwise_identity_gaps(trace):
    rows = trace.rows
    for prev, row in zip(rows, rows[1:]):
        delta_fortune = row.fortune - prev.fortune
        delta_lost = row.cum_lost_fees - prev.cum_lost_fees
        delta_swap = row.cum_swap_fees - prev.cum_swap_fees
        delta_arrival = row.cum_arrival_fees - prev.cum_arrival_fees
        scale = max(1.0, abs(prev.fortune), row.cum_arrival_fees)
        yield (delta_fortune + delta_lost + delta_swap - delta_arrival) / scale


def test_criterion_1_fee_conservation_identity():
    """Every control step: fortune change + losses + swap fees = arriving fees."""
    started = time.perf_counter()
    checked = 0
    for policy in ("autoloop", "loopmax", "none"):
        trace = run_single(desk_config(seeds=[2]), seed=2, policy_override=policy)
        gaps = list(_stepwise_identity_gaps(trace))
        assert gaps, "trace has no steps"
        worst = max(abs(g) for g in gaps)
        assert worst <= IDENTITY_RTOL, f"{policy}: worst relative gap {worst}"
        checked += len(gaps)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    print(
        f"\n[criterion 1] PASS - fee-conservation identity held on {checked} steps "
        f"across 3 policies at 1e-9 relative tolerance ({elapsed:.2f}s)"
    )


def test_criterion_2_capacity_and_fund_conservation():
    """Per-event conservation (engine-enforced) plus per-row re-validation."""
    rows_checked = 0
    for policy in ("autoloop", "loopmax"):
        # check_invariants=True makes the engine verify every channel total
        # and balance sign after every single event, raising on violation.
        trace = run_single(desk_config(seeds=[2]), seed=2, policy_override=policy)
        problems = validate_trace(trace, tolerance=1e-9)
        assert problems == [], problems
        cap_left = trace.rows[0].remote_left + trace.rows[0].local_left
        for row in trace.rows:
            total_left = row.remote_left + row.local_left + row.locked_left
            assert math.isclose(total_left, cap_left, rel_tol=1e-9)
            fortune = (
                row.local_left + row.locked_left + row.local_right + row.locked_right
                + row.onchain + row.onchain_locked
            )
            assert math.isclose(fortune, row.fortune, rel_tol=1e-12)
        rows_checked += len(trace.rows)
    print(
        f"\n[criterion 2] PASS - capacity and escrow conservation exact on every "
        f"event and all {rows_checked} trace rows"
    )


def test_criterion_3_symmetric_depletion_scenario():
    started = time.perf_counter()
    report = run_depletion_scenario(relay_prop=0.5, transactions=100)
    assert report.successes == 2, f"expected 2 successes, got {report.successes}"
    assert report.stuck_after == 2
    assert all(not ok for _, _, _, ok in report.transactions[2:])

    free = run_depletion_scenario(relay_prop=0.0, transactions=10_000)
    assert free.successes == 10_000
    assert not free.stuck
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    print(
        f"\n[criterion 3] PASS - alternating demand sticks after exactly 2 payments "
        f"at 50% fee and never sticks at zero fee ({elapsed:.2f}s)"
    )


def test_criterion_4_profitability_frontier():
    started = time.perf_counter()
    grid = [0.00003, 0.001, 0.003, 0.005, 0.01]
    seeds = [0, 1, 2]
    means: dict[str, dict[float, float]] = {"none": {}, "autoloop": {}, "loopmax": {}}
    for relay_prop in grid:
        config = desk_config(seeds=seeds, fees__relay_prop=relay_prop)
        for policy in means:
            _, summary = run_experiment(config, policy_override=policy)
            means[policy][relay_prop] = summary["mean"]

    unprofitable = [value for value in grid if value <= 0.005]
    for relay_prop in unprofitable:
        base = means["none"][relay_prop]
        assert means["autoloop"][relay_prop] <= base, (
            f"autoloop beat none at relay_prop={relay_prop}: "
            f"{means['autoloop'][relay_prop]} > {base}"
        )
        assert means["loopmax"][relay_prop] <= base, (
            f"loopmax beat none at relay_prop={relay_prop}: "
            f"{means['loopmax'][relay_prop]} > {base}"
        )

    for relay_prop in (0.00003, 0.003, 0.005):
        result = profitability_thresholds(FeeSchedule(0.0, relay_prop, 0.005, 2.0))
        assert result.swap_in is None

    at_one_percent = profitability_thresholds(FeeSchedule(0.0, 0.01, 0.005, 2.0))
    assert at_one_percent.swap_in == 2.0 / (0.01 - 0.005)
    assert at_one_percent.swap_in == 400.0
    assert at_one_percent.swap_out == 2.0 / (0.01 * 1.005 - 0.005)
    assert math.isclose(at_one_percent.swap_out, 396.04, rel_tol=1e-4)

    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"took {elapsed:.1f}s"
    print(
        f"\n[criterion 4] PASS - rebalancing never beats holding still for "
        f"relay_prop <= 0.005 over {len(unprofitable)} fee points x 3 seeds; "
        f"thresholds 400.0 / {at_one_percent.swap_out:.2f} at 1% ({elapsed:.1f}s)"
    )


def test_criterion_5_policy_oracles_and_action_fuzz():
    for case in AUTOLOOP_CASES:
        _, _, _, low, high, expected_left, expected_right = case
        decision = decide_autoloop(autoloop_context(case), AutoloopParams(low, high))
        assert_decision(decision, expected_left, expected_right)
    for case in LOOPMAX_CASES:
        decision = decide_loopmax(loopmax_context(case), LoopmaxParams(case[4]))
        assert_decision(decision, case[5], case[6])

    rng = np.random.default_rng(12345)
    pairs = 100_000
    for _ in range(pairs):
        ctx = _random_context(rng)
        raw = RawAction(*rng.uniform(-1.0, 1.0, size=2))
        check_raw_action_constraints(ctx, raw)
    print(
        f"\n[criterion 5] PASS - {len(AUTOLOOP_CASES) + len(LOOPMAX_CASES)} "
        f"hand-derived policy fixtures matched exactly; {pairs} fuzzed raw "
        f"actions satisfied every constraint"
    )


def test_criterion_6_byte_identical_determinism(tmp_path):
    config = desk_config(seeds=[7])
    first = run_single(config, seed=7).to_csv_text()
    second = run_single(config, seed=7).to_csv_text()
    assert first == second

    episode_config = desk_config(
        seeds=[7], arrivals__l_to_r__count=1000, arrivals__r_to_l__count=250
    )
    actions = lambda i: (math.sin(i * 1.7) * 0.95, math.cos(i * 0.9) * 0.95)
    transport = CallbackTransport(ScriptedAgent(actions=actions, seed=7))
    (trace, log), = serve(episode_config, transport)
    replayed = replay_policy(log, episode_config)
    assert replayed.to_csv_text() == trace.to_csv_text()
    print(
        "\n[criterion 6] PASS - repeated runs and the recorded-episode replay "
        "produce byte-identical trace CSVs"
    )
