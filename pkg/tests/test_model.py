import math

import pytest
from hypothesis import given, strategies as st

from relaysim.model import (
    AccountingError,
    ConsistencyError,
    Direction,
    DomainError,
    FeeSchedule,
    Side,
    SwapDecision,
    SwapKind,
    SwapRequest,
    SwapStatus,
    Transaction,
    ViolationCode,
    begin_swap,
    close_step_ledger,
    complete_swap,
    gross_from_net,
    max_affordable_swap_in,
    min_swap_out,
    net_from_gross,
    process_transaction,
    relay_fee,
    swap_fee,
    validate_swap_decision,
)
from conftest import BASE_FEES, make_state

close = lambda a, b: math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


# -- fee arithmetic ----------------------------------------------------------

def test_relay_fee_one_percent_of_five():
    assert relay_fee(5.0, FeeSchedule(relay_prop=0.01)) == 0.05


def test_relay_fee_zero_amount_is_free():
    assert relay_fee(0.0, BASE_FEES) == 0.0


def test_relay_fee_typical_network_rate():
    assert close(relay_fee(100.0, FeeSchedule(relay_prop=0.00003)), 100.0 * 0.00003)


def test_relay_fee_rejects_negative():
    with pytest.raises(DomainError):
        relay_fee(-1.0, BASE_FEES)


def test_swap_fee_values(fees):
    assert swap_fee(0.0, fees) == 0.0
    assert close(swap_fee(100.0, fees), 100.0 * 0.005 + 2.0)
    assert close(swap_fee(400.0, fees), 400.0 * 0.005 + 2.0)
    with pytest.raises(DomainError):
        swap_fee(-5.0, fees)


def test_gross_from_net(fees):
    assert gross_from_net(0.0, fees) == 0.0
    assert close(gross_from_net(100.0, fees), 100.0 + swap_fee(100.0, fees))
    with pytest.raises(DomainError):
        gross_from_net(-1.0, fees)


def test_net_from_gross(fees):
    assert net_from_gross(0.0, fees) == (0.0, False)
    net, below = net_from_gross(102.5, fees)
    assert not below and close(net, 100.0)
    # Nothing below the flat cost can fund a positive net amount.
    assert net_from_gross(1.5, fees) == (0.0, True)
    assert net_from_gross(2.0, fees) == (0.0, True)
    with pytest.raises(DomainError):
        net_from_gross(-0.5, fees)


def test_round_trip_through_one_thousand(fees):
    net, _ = net_from_gross(1000.0, fees)
    assert net == (1000.0 - 2.0) / 1.005
    assert close(gross_from_net(net, fees), 1000.0)


@given(st.floats(min_value=1e-3, max_value=1e9))
def test_net_gross_round_trip(x):
    fees = BASE_FEES
    net, below = net_from_gross(gross_from_net(x, fees), fees)
    assert not below
    assert math.isclose(net, x, rel_tol=1e-12)


@given(st.floats(min_value=1e-3, max_value=1e6), st.floats(min_value=1e-3, max_value=1e6))
def test_gross_from_net_strictly_increasing(a, b):
    lo, hi = sorted((a, b))
    if lo < hi:
        assert gross_from_net(lo, BASE_FEES) < gross_from_net(hi, BASE_FEES)


def test_min_swap_out_is_the_threshold(fees):
    floor = min_swap_out(fees)
    assert floor == 2.0 / (1.0 - 0.005)
    # The floor is exactly where a swap-out stops losing to its own fee.
    assert floor - swap_fee(floor, fees) >= 0
    just_below = floor * (1 - 1e-9)
    assert just_below - swap_fee(just_below, fees) < 0


@given(st.floats(min_value=0.1, max_value=1e7))
def test_max_affordable_swap_in_fits_budget(onchain):
    fees = BASE_FEES
    amount = max_affordable_swap_in(onchain, fees)
    assert amount >= 0
    if amount > 0:
        assert amount + swap_fee(amount, fees) <= onchain


# -- transaction processing ---------------------------------------------------

def test_forwarding_moves_amount_minus_fee(fees):
    # A payment of 5 through the node: sender pays 5, receiver gets 4.95,
    # and the node keeps 0.05.
    state = make_state(local_l=500, remote_l=10, local_r=10, remote_r=990, cap_l=510, cap_r=1000)
    tx = Transaction(Direction.L_TO_R, 5.0, 1.0)
    out, ok, earned, lost = process_transaction(state, tx, fees)
    assert ok and lost == 0.0
    assert close(earned, 0.05)
    assert close(out.channel(Side.LEFT).remote, 5.0)
    assert close(out.channel(Side.LEFT).local, 505.0)
    assert close(out.channel(Side.RIGHT).local, 5.05)
    assert close(out.channel(Side.RIGHT).remote, 994.95)
    assert close(out.fortune - state.fortune, 0.05)


def test_insufficient_sender_balance_drops_payment(fees):
    state = make_state(remote_l=3.0, local_l=7.0, cap_l=10)
    tx = Transaction(Direction.L_TO_R, 5.0, 1.0)
    out, ok, earned, lost = process_transaction(state, tx, fees)
    assert not ok and earned == 0.0
    assert close(lost, 0.05)
    assert out is state  # failed payments change nothing


def test_insufficient_forwarding_balance_drops_payment(fees):
    state = make_state(local_r=4.0, remote_r=996.0)
    tx = Transaction(Direction.L_TO_R, 5.0, 1.0)
    out, ok, _, lost = process_transaction(state, tx, fees)
    assert not ok and out is state
    assert close(lost, relay_fee(5.0, fees))


def test_amount_equal_to_sender_balance_succeeds(fees):
    # Feasibility is inclusive on both conditions.
    state = make_state(remote_r=50.0, local_r=950.0, local_l=500.0, remote_l=500.0)
    tx = Transaction(Direction.R_TO_L, 50.0, 2.0)
    out, ok, earned, _ = process_transaction(state, tx, fees)
    assert ok
    assert out.channel(Side.RIGHT).remote == 0.0
    assert close(earned, 0.5)


@given(
    amount=st.floats(min_value=0.01, max_value=2000),
    remote_l=st.floats(min_value=0, max_value=1000),
    local_r=st.floats(min_value=0, max_value=1000),
)
def test_transaction_conserves_channel_totals(amount, remote_l, local_r):
    fees = BASE_FEES
    state = make_state(
        local_l=1000 - remote_l, remote_l=remote_l, local_r=local_r, remote_r=1000 - local_r
    )
    tx = Transaction(Direction.L_TO_R, amount, 1.0)
    out, ok, earned, lost = process_transaction(state, tx, fees)
    assert close(earned + lost, relay_fee(amount, fees))
    for side in Side:
        ch = out.channel(side)
        assert math.isclose(ch.local + ch.remote, 1000.0, rel_tol=1e-9)
        assert ch.local >= 0 and ch.remote >= 0
    if ok:
        assert math.isclose(out.fortune - state.fortune, earned, rel_tol=1e-9, abs_tol=1e-12)
    else:
        assert out is state


# -- decision validation ------------------------------------------------------

def test_valid_swap_out_passes(fees):
    state = make_state(local_l=400, remote_l=600)
    decision = SwapDecision(left=SwapRequest(SwapKind.SWAP_OUT, 100.0))
    kept, violations = validate_swap_decision(state, decision, fees)
    assert violations == []
    assert kept == decision


def test_tiny_swap_out_downgraded(fees):
    state = make_state()
    decision = SwapDecision(left=SwapRequest(SwapKind.SWAP_OUT, 1.5))
    kept, violations = validate_swap_decision(state, decision, fees)
    assert kept.is_noop
    assert [v.code for v in violations] == [ViolationCode.BELOW_MIN_SWAP_OUT]


def test_swap_out_beyond_local_downgraded(fees):
    state = make_state(local_l=50, remote_l=950)
    decision = SwapDecision(left=SwapRequest(SwapKind.SWAP_OUT, 100.0))
    kept, violations = validate_swap_decision(state, decision, fees)
    assert kept.is_noop
    assert [v.code for v in violations] == [ViolationCode.EXCEEDS_LOCAL_BALANCE]


def test_joint_swap_ins_drop_right_side_first(fees):
    state = make_state(onchain=600.0)
    decision = SwapDecision(
        left=SwapRequest(SwapKind.SWAP_IN, 500.0), right=SwapRequest(SwapKind.SWAP_IN, 500.0)
    )
    kept, violations = validate_swap_decision(state, decision, fees)
    # 2 * (500 + 4.5) > 600, but one side alone fits.
    assert kept.left is not None and kept.right is None
    assert [(v.side, v.code) for v in violations] == [
        (Side.RIGHT, ViolationCode.EXCEEDS_ONCHAIN_FUNDS)
    ]


def test_single_unaffordable_swap_in_downgraded(fees):
    state = make_state(onchain=100.0)
    decision = SwapDecision(left=SwapRequest(SwapKind.SWAP_IN, 500.0))
    kept, violations = validate_swap_decision(state, decision, fees)
    assert kept.is_noop
    assert violations[0].code is ViolationCode.EXCEEDS_ONCHAIN_FUNDS


def test_busy_channel_rejects_new_request(fees):
    state = make_state()
    state, _ = begin_swap(state, Side.LEFT, SwapKind.SWAP_OUT, 100.0, 0.0, fees, 10.0)
    decision = SwapDecision(left=SwapRequest(SwapKind.SWAP_IN, 50.0))
    kept, violations = validate_swap_decision(state, decision, fees)
    assert kept.is_noop
    assert violations[0].code is ViolationCode.CHANNEL_BUSY


def test_nonpositive_amount_downgraded(fees):
    state = make_state()
    for amount in (0.0, -5.0):
        decision = SwapDecision(right=SwapRequest(SwapKind.SWAP_IN, amount))
        kept, violations = validate_swap_decision(state, decision, fees)
        assert kept.is_noop
        assert violations[0].code is ViolationCode.NEGATIVE_AMOUNT


# -- swap lifecycle -----------------------------------------------------------

def test_begin_swap_in_escrows_amount_plus_fee(fees):
    state = make_state(onchain=1000.0)
    out, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_IN, 300.0, 0.0, fees, 10.0)
    assert close(out.onchain, 696.5)
    assert close(out.onchain_locked, 303.5)
    assert op.complete_time == 10.0
    assert out.channel(Side.LEFT).pending == op
    assert out.channel(Side.LEFT).local == state.channel(Side.LEFT).local
    assert close(out.fortune, state.fortune)


def test_begin_swap_out_locks_channel_funds(fees):
    state = make_state(local_l=400, remote_l=600)
    out, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_OUT, 200.0, 5.0, fees, 10.0)
    assert out.channel(Side.LEFT).local == 200.0
    assert out.channel(Side.LEFT).locked == 200.0
    assert op.complete_time == 15.0
    assert out.onchain == state.onchain
    assert close(out.fortune, state.fortune)


def test_begin_swap_rejects_zero_amount(fees):
    with pytest.raises(DomainError):
        begin_swap(make_state(), Side.LEFT, SwapKind.SWAP_IN, 0.0, 0.0, fees, 10.0)


def test_begin_swap_rejects_unaffordable(fees):
    with pytest.raises(DomainError):
        begin_swap(make_state(onchain=10.0), Side.LEFT, SwapKind.SWAP_IN, 300.0, 0.0, fees, 10.0)
    with pytest.raises(DomainError):
        begin_swap(make_state(local_l=100, remote_l=900), Side.LEFT, SwapKind.SWAP_OUT, 200.0, 0.0, fees, 10.0)


def test_complete_swap_in_success(fees):
    state = make_state(local_l=150, remote_l=350, onchain=1000.0)
    state, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_IN, 300.0, 0.0, fees, 10.0)
    before = state.fortune
    out, done = complete_swap(state, op, fees)
    assert done.status is SwapStatus.SUCCEEDED
    assert out.channel(Side.LEFT).remote == 50.0
    assert out.channel(Side.LEFT).local == 450.0
    assert out.onchain_locked == 0.0
    # The swap fee is realized when the escrow is spent.
    assert close(before - out.fortune, swap_fee(300.0, fees))


def test_complete_swap_in_refund_restores_onchain(fees):
    state = make_state(local_l=250, remote_l=250, onchain=1000.0)
    state, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_IN, 300.0, 0.0, fees, 10.0)
    before = state.fortune
    out, done = complete_swap(state, op, fees)
    assert done.status is SwapStatus.FAILED_REFUNDED
    assert close(out.onchain, 1000.0)
    assert out.onchain_locked == 0.0
    assert out.channel(Side.LEFT).remote == 250.0
    assert close(out.fortune, before)


def test_complete_swap_in_boundary_remote_equal_succeeds(fees):
    state = make_state(local_l=200, remote_l=300, onchain=1000.0)
    state, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_IN, 300.0, 0.0, fees, 10.0)
    out, done = complete_swap(state, op, fees)
    assert done.status is SwapStatus.SUCCEEDED
    assert out.channel(Side.LEFT).remote == 0.0


def test_complete_swap_out_pays_net_onchain(fees):
    state = make_state(local_l=400, remote_l=600, onchain=0.0)
    state, op = begin_swap(state, Side.LEFT, SwapKind.SWAP_OUT, 200.0, 0.0, fees, 10.0)
    before = state.fortune
    out, done = complete_swap(state, op, fees)
    assert done.status is SwapStatus.SUCCEEDED
    assert close(out.onchain, (200.0 - 2.0) / 1.005)
    assert out.channel(Side.LEFT).remote == 800.0
    assert out.channel(Side.LEFT).locked == 0.0
    assert close(before - out.fortune, swap_fee(op.net_amount, fees))


def test_complete_swap_requires_pending_match(fees):
    state = make_state()
    other, op = begin_swap(make_state(), Side.LEFT, SwapKind.SWAP_OUT, 100.0, 0.0, fees, 10.0)
    with pytest.raises(ConsistencyError):
        complete_swap(state, op, fees)


@given(
    amount=st.floats(min_value=3.0, max_value=400.0),
    kind=st.sampled_from([SwapKind.SWAP_IN, SwapKind.SWAP_OUT]),
    remote_at_completion=st.floats(min_value=0.0, max_value=1000.0),
)
def test_swap_lifecycle_conserves_capacity(amount, kind, remote_at_completion):
    fees = BASE_FEES
    state = make_state(local_l=500, remote_l=500, onchain=1000.0)
    state, op = begin_swap(state, Side.LEFT, kind, amount, 0.0, fees, 10.0)
    ch = state.channel(Side.LEFT)
    assert math.isclose(ch.local + ch.remote + ch.locked, 1000.0, rel_tol=1e-9)
    out, done = complete_swap(state, op, fees)
    ch = out.channel(Side.LEFT)
    assert ch.pending is None
    assert math.isclose(ch.local + ch.remote + ch.locked, 1000.0, rel_tol=1e-9)
    if done.status is SwapStatus.FAILED_REFUNDED:
        assert math.isclose(out.fortune, 2000.0, rel_tol=1e-9)


# -- step ledger ---------------------------------------------------------------

def test_ledger_single_successful_payment():
    ledger = close_step_ledger(0.05, 0.0, 0.0, 0, 5000.0, 5000.05, 0.05)
    assert ledger.fortune_delta == pytest.approx(0.05)
    assert ledger.identity_gap == pytest.approx(0.0)


def test_ledger_empty_interval():
    ledger = close_step_ledger(0.0, 0.0, 0.0, 0, 5000.0, 5000.0, 0.0)
    assert ledger.fortune_delta == 0.0
    assert ledger.lost_fees == 0.0


def test_ledger_drop_plus_swap():
    # One dropped payment of 5 (fee 0.05) and one swap costing 2.5: the
    # fortune fell by the swap cost while the books still balance.
    ledger = close_step_ledger(0.0, 0.05, 2.5, 0, 5000.0, 4997.5, 0.05)
    assert ledger.fortune_delta == pytest.approx(-2.5)
    assert ledger.lost_fees + ledger.swap_fees_paid == pytest.approx(2.55)


def test_ledger_identity_violation_raises():
    with pytest.raises(AccountingError):
        close_step_ledger(0.0, 0.0, 0.0, 0, 5000.0, 5001.0, 0.0)
