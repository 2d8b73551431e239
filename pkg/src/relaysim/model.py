"""Balance accounting for a two-channel relay node.

Channel state, relay and swap fees, transaction processing, and the swap
lifecycle (escrow -> confirmation -> completion or refund). All transition
functions are pure: they take a state and return a new one, so a failed
operation can never leave a half-applied update behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional


class Side(Enum):
    """The two channel neighbors of the relay node."""

    LEFT = "L"
    RIGHT = "R"

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class Direction(Enum):
    L_TO_R = "l_to_r"
    R_TO_L = "r_to_l"

    @property
    def source(self) -> Side:
        """Neighbor that sends; its remote balance funds the first hop."""
        return Side.LEFT if self is Direction.L_TO_R else Side.RIGHT

    @property
    def sink(self) -> Side:
        """Neighbor that receives; the node's local balance funds the second hop."""
        return Side.RIGHT if self is Direction.L_TO_R else Side.LEFT


class SwapKind(Enum):
    SWAP_IN = "in"    # on-chain -> channel (refills the node's local balance)
    SWAP_OUT = "out"  # channel -> on-chain (offloads the node's local balance)


class SwapStatus(Enum):
    PENDING = "pending"
    SUCCEEDED = "succeeded"
    FAILED_REFUNDED = "failed_refunded"


class DomainError(ValueError):
    """Raised when an operation's precondition is violated."""


class ConsistencyError(RuntimeError):
    """Raised when internal bookkeeping is out of sync (always a bug)."""


@dataclass(frozen=True)
class FeeSchedule:
    """Relay fee parameters and swap (LSP + miner) fee parameters.

    relay_base + relay_prop * amount is charged per forwarded payment;
    swap_rate * net + swap_flat is charged per swap of net amount.
    """

    relay_base: float = 0.0
    relay_prop: float = 0.0
    swap_rate: float = 0.0
    swap_flat: float = 0.0

    def __post_init__(self) -> None:
        for name in ("relay_base", "relay_prop", "swap_rate", "swap_flat"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.relay_prop >= 1:
            raise DomainError("relay_prop must be < 1")
        if self.swap_rate >= 1:
            raise DomainError("swap_rate must be < 1")


def relay_fee(amount: float, fees: FeeSchedule) -> float:
    """Fee withheld by a node that forwards `amount`; zero for zero amount."""
    if amount < 0:
        raise DomainError(f"negative amount: {amount}")
    if amount == 0:
        return 0.0
    return fees.relay_base + fees.relay_prop * amount


def swap_fee(net_amount: float, fees: FeeSchedule) -> float:
    """Total fee charged for moving `net_amount` between layers; zero at zero."""
    if net_amount < 0:
        raise DomainError(f"negative net amount: {net_amount}")
    if net_amount == 0:
        return 0.0
    return net_amount * fees.swap_rate + fees.swap_flat


def gross_from_net(net_amount: float, fees: FeeSchedule) -> float:
    """Gross cost of a swap that moves `net_amount`: net plus its fee."""
    if net_amount < 0:
        raise DomainError(f"negative net amount: {net_amount}")
    if net_amount == 0:
        return 0.0
    return net_amount * (1.0 + fees.swap_rate) + fees.swap_flat


def net_from_gross(gross: float, fees: FeeSchedule) -> tuple[float, bool]:
    """Invert gross_from_net.

    Returns (net, below_minimum). A gross amount in (0, swap_flat] cannot
    fund any positive net movement; the flag marks that case and net is 0.
    """
    if gross < 0:
        raise DomainError(f"negative gross amount: {gross}")
    if gross == 0:
        return 0.0, False
    if gross <= fees.swap_flat:
        return 0.0, True
    return (gross - fees.swap_flat) / (1.0 + fees.swap_rate), False


def min_swap_out(fees: FeeSchedule) -> float:
    """Smallest swap-out amount whose in-channel total covers its own fee."""
    return fees.swap_flat / (1.0 - fees.swap_rate)


def max_affordable_swap_in(onchain: float, fees: FeeSchedule) -> float:
    """Largest swap-in amount whose amount-plus-fee fits the on-chain funds.

    Starts from the closed-form inverse and nudges down by ulps if rounding
    made the recomputed escrow overshoot, so the returned amount always
    passes the on-chain budget check exactly.
    """
    net, _ = net_from_gross(onchain, fees)
    while net > 0 and net + swap_fee(net, fees) > onchain:
        net = math.nextafter(net, 0.0)
    return max(net, 0.0)


@dataclass(frozen=True)
class Transaction:
    direction: Direction
    amount: float
    arrival_time: float

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise DomainError(f"transaction amount must be > 0, got {self.amount}")
        if self.arrival_time < 0:
            raise DomainError("arrival_time must be >= 0")


@dataclass(frozen=True)
class SwapOperation:
    """An in-flight or settled swap.

    `amount` uses in-channel semantics: for a swap-in it equals the net
    amount credited to the local balance; for a swap-out it is the locked
    channel amount, of which only `net_amount` reaches the chain.
    """

    kind: SwapKind
    side: Side
    amount: float
    net_amount: float
    fee: float
    start_time: float
    complete_time: float
    status: SwapStatus = SwapStatus.PENDING

    @property
    def escrow(self) -> float:
        """On-chain funds locked while a swap-in is pending."""
        return self.amount + self.fee if self.kind is SwapKind.SWAP_IN else 0.0

    @property
    def channel_lock(self) -> float:
        """In-channel funds locked while a swap-out is pending."""
        return self.amount if self.kind is SwapKind.SWAP_OUT else 0.0


@dataclass(slots=True)
class ChannelState:
    """One channel seen from the node: local is ours, remote is the neighbor's."""

    capacity: float
    local: float
    remote: float
    pending: Optional[SwapOperation] = None

    @property
    def locked(self) -> float:
        return self.pending.channel_lock if self.pending is not None else 0.0


@dataclass(slots=True)
class NodeState:
    """Both channels plus the node's on-chain funds (free and escrowed)."""

    channels: dict[Side, ChannelState]
    onchain: float
    onchain_locked: float = 0.0

    @property
    def fortune(self) -> float:
        """Everything the node owns: local balances, locks, and chain funds."""
        total = self.onchain + self.onchain_locked
        for ch in self.channels.values():
            total += ch.local + ch.locked
        return total

    def channel(self, side: Side) -> ChannelState:
        return self.channels[side]

    def with_channel(self, side: Side, ch: ChannelState) -> "NodeState":
        channels = dict(self.channels)
        channels[side] = ch
        return NodeState(channels, self.onchain, self.onchain_locked)


@dataclass(frozen=True)
class SwapRequest:
    kind: SwapKind
    amount: float


@dataclass(frozen=True)
class SwapDecision:
    """At most one swap request per side; None means no action.

    One optional slot per side makes a simultaneous swap-in and swap-out on
    the same channel unrepresentable.
    """

    left: Optional[SwapRequest] = None
    right: Optional[SwapRequest] = None

    def get(self, side: Side) -> Optional[SwapRequest]:
        return self.left if side is Side.LEFT else self.right

    def without(self, side: Side) -> "SwapDecision":
        if side is Side.LEFT:
            return SwapDecision(None, self.right)
        return SwapDecision(self.left, None)

    def requests(self) -> Iterator[tuple[Side, SwapRequest]]:
        if self.left is not None:
            yield Side.LEFT, self.left
        if self.right is not None:
            yield Side.RIGHT, self.right

    @property
    def is_noop(self) -> bool:
        return self.left is None and self.right is None


NO_SWAPS = SwapDecision()


class ViolationCode(Enum):
    CHANNEL_BUSY = "channel_busy"
    NEGATIVE_AMOUNT = "negative_amount"
    BELOW_MIN_SWAP_OUT = "below_min_swap_out"
    EXCEEDS_LOCAL_BALANCE = "exceeds_local_balance"
    EXCEEDS_ONCHAIN_FUNDS = "exceeds_onchain_funds"


@dataclass(frozen=True)
class SwapViolation:
    side: Side
    code: ViolationCode
    detail: str


def _escrow_total(channels: dict[Side, ChannelState]) -> float:
    """On-chain escrow recomputed from the pending swaps themselves.

    Deriving the total instead of incrementally adding and subtracting keeps
    it exact (never negative by rounding dust) with any number of pendings.
    """
    total = 0.0
    for ch in channels.values():
        if ch.pending is not None:
            total += ch.pending.escrow
    return total


def process_transaction(
    state: NodeState, tx: Transaction, fees: FeeSchedule
) -> tuple[NodeState, bool, float, float]:
    """Apply one relayed payment; all-or-nothing.

    Returns (state, success, relay_fee_earned, lost_fee). A payment succeeds
    iff the sender's balance covers the full amount and the node's balance on
    the outgoing channel covers the forwarded amount (fee withheld).
    """
    fee = relay_fee(tx.amount, fees)
    src = state.channel(tx.direction.source)
    dst = state.channel(tx.direction.sink)
    forwarded = tx.amount - fee
    feasible = tx.amount <= src.remote and 0 <= forwarded <= dst.local
    if not feasible:
        return state, False, 0.0, fee

    new_src = ChannelState(src.capacity, src.local + tx.amount, src.remote - tx.amount, src.pending)
    new_dst = ChannelState(dst.capacity, dst.local - forwarded, dst.remote + forwarded, dst.pending)
    channels = {tx.direction.source: new_src, tx.direction.sink: new_dst}
    return NodeState(channels, state.onchain, state.onchain_locked), True, fee, 0.0


def validate_swap_decision(
    state: NodeState, decision: SwapDecision, fees: FeeSchedule
) -> tuple[SwapDecision, list[SwapViolation]]:
    """Check a decision against the swap constraints.

    Violating requests are downgraded to no-ops rather than aborting the
    step. When the two swap-ins jointly exceed the on-chain funds, the right
    side is dropped first so reruns are reproducible.
    """
    violations: list[SwapViolation] = []
    kept = decision

    for side, req in decision.requests():
        ch = state.channel(side)
        if ch.pending is not None:
            violations.append(SwapViolation(side, ViolationCode.CHANNEL_BUSY, "swap already pending"))
            kept = kept.without(side)
        elif req.amount <= 0:
            violations.append(
                SwapViolation(side, ViolationCode.NEGATIVE_AMOUNT, f"amount {req.amount} is not positive")
            )
            kept = kept.without(side)
        elif req.kind is SwapKind.SWAP_OUT:
            floor = min_swap_out(fees)
            if req.amount < floor:
                violations.append(
                    SwapViolation(
                        side,
                        ViolationCode.BELOW_MIN_SWAP_OUT,
                        f"amount {req.amount} below minimum {floor}",
                    )
                )
                kept = kept.without(side)
            elif req.amount > ch.local:
                violations.append(
                    SwapViolation(
                        side,
                        ViolationCode.EXCEEDS_LOCAL_BALANCE,
                        f"amount {req.amount} exceeds local balance {ch.local}",
                    )
                )
                kept = kept.without(side)

    def onchain_need(dec: SwapDecision) -> float:
        return sum(
            req.amount + swap_fee(req.amount, fees)
            for _, req in dec.requests()
            if req.kind is SwapKind.SWAP_IN
        )

    # Swap-ins share the on-chain budget; drop the right side first, then the left.
    for side in (Side.RIGHT, Side.LEFT):
        if onchain_need(kept) <= state.onchain:
            break
        req = kept.get(side)
        if req is not None and req.kind is SwapKind.SWAP_IN:
            violations.append(
                SwapViolation(
                    side,
                    ViolationCode.EXCEEDS_ONCHAIN_FUNDS,
                    f"joint swap-in cost {onchain_need(kept)} exceeds on-chain {state.onchain}",
                )
            )
            kept = kept.without(side)

    return kept, violations


def begin_swap(
    state: NodeState,
    side: Side,
    kind: SwapKind,
    amount: float,
    now: float,
    fees: FeeSchedule,
    confirm_delay: float,
) -> tuple[NodeState, SwapOperation]:
    """Lock funds and open a swap that settles after the confirmation delay."""
    if amount <= 0:
        raise DomainError(f"swap amount must be > 0, got {amount}")
    ch = state.channel(side)
    if ch.pending is not None:
        raise DomainError(f"channel {side.value} already has a pending swap")

    if kind is SwapKind.SWAP_IN:
        fee = swap_fee(amount, fees)
        escrow = amount + fee
        if escrow > state.onchain:
            raise DomainError(f"swap-in needs {escrow} on-chain, only {state.onchain} available")
        op = SwapOperation(kind, side, amount, amount, fee, now, now + confirm_delay)
        channels = dict(state.channels)
        channels[side] = ChannelState(ch.capacity, ch.local, ch.remote, op)
        return NodeState(channels, state.onchain - escrow, _escrow_total(channels)), op

    net, below = net_from_gross(amount, fees)
    if below:
        raise DomainError(f"swap-out amount {amount} cannot cover the flat fee")
    if amount > ch.local:
        raise DomainError(f"swap-out {amount} exceeds local balance {ch.local}")
    op = SwapOperation(kind, side, amount, net, amount - net, now, now + confirm_delay)
    new_state = state.with_channel(side, ChannelState(ch.capacity, ch.local - amount, ch.remote, op))
    return new_state, op


def complete_swap(
    state: NodeState, op: SwapOperation, fees: FeeSchedule
) -> tuple[NodeState, SwapOperation]:
    """Settle a pending swap at its confirmation time.

    A swap-in succeeds iff the neighbor can still forward the amount
    (remote >= amount); otherwise the full escrow is refunded on-chain. A
    swap-out always settles: the locked amount moves to the neighbor and the
    net amount arrives on-chain.
    """
    ch = state.channel(op.side)
    if ch.pending != op:
        raise ConsistencyError(f"swap {op} is not pending on channel {op.side.value}")

    if op.kind is SwapKind.SWAP_IN:
        escrow = op.escrow
        channels = dict(state.channels)
        if ch.remote >= op.amount:
            done = replace(op, status=SwapStatus.SUCCEEDED)
            channels[op.side] = ChannelState(
                ch.capacity, ch.local + op.amount, ch.remote - op.amount, None
            )
            return NodeState(channels, state.onchain, _escrow_total(channels)), done
        done = replace(op, status=SwapStatus.FAILED_REFUNDED)
        channels[op.side] = ChannelState(ch.capacity, ch.local, ch.remote, None)
        return NodeState(channels, state.onchain + escrow, _escrow_total(channels)), done

    done = replace(op, status=SwapStatus.SUCCEEDED)
    new_ch = ChannelState(ch.capacity, ch.local, ch.remote + op.amount, None)
    new_state = NodeState(
        dict(state.channels), state.onchain + op.net_amount, state.onchain_locked
    )
    new_state.channels[op.side] = new_ch
    return new_state, done


@dataclass(frozen=True)
class StepLedger:
    """Accounting for one control interval.

    The books must balance: the fortune change plus everything lost (dropped
    relay fees and swap fees actually paid) equals the fees the node would
    have collected had all arriving traffic succeeded.
    """

    relay_fees_earned: float
    lost_fees: float
    swap_fees_paid: float
    failed_swaps: int
    fortune_before: float
    fortune_after: float
    total_arriving_fees: float

    @property
    def fortune_delta(self) -> float:
        return self.fortune_after - self.fortune_before

    @property
    def identity_gap(self) -> float:
        return (self.fortune_delta + self.lost_fees + self.swap_fees_paid) - self.total_arriving_fees


class AccountingError(ConsistencyError):
    """The step ledger identity failed beyond tolerance."""


def close_step_ledger(
    relay_fees_earned: float,
    lost_fees: float,
    swap_fees_paid: float,
    failed_swaps: int,
    fortune_before: float,
    fortune_after: float,
    total_arriving_fees: float,
    tolerance: float = 1e-9,
) -> StepLedger:
    """Build the interval ledger, enforcing the conservation identity."""
    ledger = StepLedger(
        relay_fees_earned,
        lost_fees,
        swap_fees_paid,
        failed_swaps,
        fortune_before,
        fortune_after,
        total_arriving_fees,
    )
    scale = max(1.0, abs(fortune_before), abs(total_arriving_fees))
    if abs(ledger.identity_gap) > tolerance * scale:
        raise AccountingError(
            f"ledger identity violated: gap={ledger.identity_gap!r} ledger={ledger}"
        )
    return ledger
