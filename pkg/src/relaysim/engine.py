"""Event-driven simulation of the relay node.

A single binary heap carries three event kinds: swap completions,
transaction arrivals, and control epochs. At equal times completions are
applied first (so funds settling exactly at a check time are visible to the
decision), then arrivals, then the control epoch; remaining ties break by
scheduling order, so a (seed, configuration) pair always replays the exact
same event sequence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Protocol

import numpy as np

from .estimators import DemandEstimates, WindowedDemandEstimates, record_arrival
from .metrics import MetricsTrace, StepRecord
from .model import (
    ConsistencyError,
    Direction,
    FeeSchedule,
    NodeState,
    Side,
    SwapOperation,
    SwapStatus,
    Transaction,
    begin_swap,
    close_step_ledger,
    complete_swap,
    process_transaction,
    validate_swap_decision,
    NO_SWAPS,
)
from .policies import PolicyContext, PolicyFn, compute_reward


class EventKind(IntEnum):
    """Heap priority at equal times: completion < arrival < control."""

    SWAP_COMPLETION = 0
    TX_ARRIVAL = 1
    CONTROL_EPOCH = 2


@dataclass(slots=True)
class Event:
    time: float
    kind: EventKind
    sequence: int
    tx: Optional[Transaction] = None
    op: Optional[SwapOperation] = None
    epoch: int = 0
    source_index: int = -1

    def sort_key(self) -> tuple[float, int, int]:
        return (self.time, int(self.kind), self.sequence)

    def __lt__(self, other: "Event") -> bool:
        return self.sort_key() < other.sort_key()


def event_order(a: Event, b: Event) -> int:
    """Total order over events: -1, 0, or +1 as a sorts before, with, or after b."""
    ka, kb = a.sort_key(), b.sort_key()
    return (ka > kb) - (ka < kb)


class AmountSampler(Protocol):
    def sample(self, rng: np.random.Generator) -> float: ...


@dataclass(frozen=True)
class GaussianAmounts:
    mean: float
    std: float

    def __post_init__(self) -> None:
        if self.std <= 0:
            raise ValueError("std must be > 0")

    def sample(self, rng: np.random.Generator) -> float:
        # Resample rather than clamp: amounts must be strictly positive and
        # clamping would pile mass at zero.
        while True:
            value = rng.normal(self.mean, self.std)
            if value > 0:
                return float(value)


@dataclass(frozen=True)
class UniformAmounts:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.lo < 0:
            raise ValueError("lo must be >= 0")

    def sample(self, rng: np.random.Generator) -> float:
        while True:
            value = rng.uniform(self.lo, self.hi)
            if value > 0:
                return float(value)


@dataclass(frozen=True)
class FixedAmount:
    value: float

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise ValueError("value must be > 0")

    def sample(self, rng: np.random.Generator) -> float:
        return self.value


class ArrivalSource(Protocol):
    direction: Direction
    count_limited: bool

    def next_transaction(self) -> Optional[Transaction]: ...


class PoissonArrivals:
    """Poisson process in one direction with i.i.d. amounts.

    Inter-arrival times and amounts come from separate streams so that the
    amount sequence is insensitive to how many arrivals another source
    produced, and vice versa.
    """

    def __init__(
        self,
        direction: Direction,
        rate: float,
        amounts: AmountSampler,
        times_rng: np.random.Generator,
        amounts_rng: np.random.Generator,
        count: Optional[int] = None,
    ) -> None:
        if rate <= 0:
            raise ValueError("rate must be > 0 tx/minute")
        self.direction = direction
        self.rate = rate
        self.amounts = amounts
        self.count_limited = count is not None
        self._times_rng = times_rng
        self._amounts_rng = amounts_rng
        self._remaining = count
        self._clock = 0.0

    def next_transaction(self) -> Optional[Transaction]:
        if self._remaining is not None:
            if self._remaining <= 0:
                return None
            self._remaining -= 1
        self._clock += self._times_rng.exponential(1.0 / self.rate)
        amount = self.amounts.sample(self._amounts_rng)
        return Transaction(self.direction, amount, self._clock)


class PeriodicArrivals:
    """Deterministic arrivals: fixed interval, fixed amount."""

    def __init__(
        self,
        direction: Direction,
        first: float,
        interval: float,
        amount: float,
        count: Optional[int] = None,
    ) -> None:
        if interval <= 0:
            raise ValueError("interval must be > 0")
        if first < 0:
            raise ValueError("first arrival time must be >= 0")
        self.direction = direction
        self.first = first
        self.interval = interval
        self.amount = amount
        self.count_limited = count is not None
        self._remaining = count
        self._emitted = 0

    def next_transaction(self) -> Optional[Transaction]:
        if self._remaining is not None and self._emitted >= self._remaining:
            return None
        t = self.first + self._emitted * self.interval
        self._emitted += 1
        return Transaction(self.direction, self.amount, t)


_STREAM_KEYS = {
    Direction.L_TO_R: (0, 1),  # (inter-arrival stream, amount stream)
    Direction.R_TO_L: (2, 3),
}


def make_streams(
    seed: int, direction: Direction, stream_seed: Optional[int] = None
) -> tuple[np.random.Generator, np.random.Generator]:
    """Derive the (times, amounts) generator pair for one direction.

    A per-direction stream_seed override re-seeds only that direction,
    leaving the other direction's sequences untouched.
    """
    entropy = seed if stream_seed is None else stream_seed
    keys = _STREAM_KEYS[direction]
    return tuple(
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=entropy, spawn_key=(key,))))
        for key in keys
    )


@dataclass(frozen=True)
class ClockConfig:
    """Control cadence: decisions every check_interval, swaps settle after confirm_delay."""

    check_interval: float
    confirm_delay: float

    def __post_init__(self) -> None:
        if not (0 < self.confirm_delay <= self.check_interval):
            raise ValueError("need check_interval >= confirm_delay > 0")


class SimulationError(ConsistencyError):
    """An engine invariant failed mid-run; message carries a state dump."""


_CAPACITY_RTOL = 1e-9


@dataclass(slots=True)
class _StepAccumulator:
    fortune_before: float
    relay_fees: float = 0.0
    lost_fees: float = 0.0
    swap_fees: float = 0.0
    arrival_fees: float = 0.0
    failed_swaps: int = 0
    downgrades: list = field(default_factory=list)
    swap_events: list = field(default_factory=list)


class Simulation:
    """One seeded run: state, estimators, event heap, and per-step records."""

    def __init__(
        self,
        initial: NodeState,
        fees: FeeSchedule,
        clock: ClockConfig,
        sources: list[ArrivalSource],
        policy: PolicyFn,
        *,
        horizon_minutes: Optional[float] = None,
        max_decisions: Optional[int] = None,
        penalty: float = 0.0,
        estimator_window: Optional[float] = None,
        check_invariants: bool = True,
        collect_transactions: bool = False,
        meta: Optional[dict] = None,
    ) -> None:
        if horizon_minutes is None and max_decisions is None:
            if not (sources and all(s.count_limited for s in sources)):
                raise ValueError("need a time horizon, a decision cap, or counted sources")
        self.state = initial
        self.fees = fees
        self.clock = clock
        self.sources = sources
        self.policy = policy
        self.horizon_minutes = horizon_minutes
        self.max_decisions = max_decisions
        self.penalty = penalty
        self.check_invariants = check_invariants
        self.collect_transactions = collect_transactions
        self.transactions: list[tuple[float, Direction, float, bool]] = []
        self.now = 0.0

        if estimator_window is not None:
            self.estimates: DemandEstimates | WindowedDemandEstimates = WindowedDemandEstimates(
                estimator_window
            )
        else:
            self.estimates = DemandEstimates()

        self._heap: list[Event] = []
        self._seq = 0
        self._open_arrivals = 0
        self._sources_done = [False] * len(sources)
        self._cum_relay = 0.0
        self._cum_lost = 0.0
        self._cum_swap_fees = 0.0
        self._cum_arrival_fees = 0.0
        self._cum_failed = 0
        self._cum_downgrades = 0
        self._acc = _StepAccumulator(fortune_before=initial.fortune)
        self._prev_ledger = None
        self._trace = MetricsTrace(meta=dict(meta or {}))
        self._finished = False

        self._check_state(None)
        self._push(Event(0.0, EventKind.CONTROL_EPOCH, self._next_seq(), epoch=0))
        for index in range(len(sources)):
            self._schedule_arrival(index)

    # -- plumbing ---------------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _push(self, event: Event) -> None:
        heapq.heappush(self._heap, event)

    def _schedule_arrival(self, index: int) -> None:
        source = self.sources[index]
        tx = source.next_transaction()
        if tx is not None and self.horizon_minutes is not None and tx.arrival_time > self.horizon_minutes:
            tx = None
        if tx is None:
            self._sources_done[index] = True
            return
        self._open_arrivals += 1
        self._push(
            Event(tx.arrival_time, EventKind.TX_ARRIVAL, self._next_seq(), tx=tx, source_index=index)
        )

    def _record_estimate(self, tx: Transaction, success: bool) -> None:
        if isinstance(self.estimates, WindowedDemandEstimates):
            self.estimates.record(tx, success, self.fees)
        else:
            self.estimates = record_arrival(self.estimates, tx, success, self.fees)

    def _check_state(self, event: Optional[Event]) -> None:
        if not self.check_invariants:
            return
        st = self.state
        if st.onchain < 0 or st.onchain_locked < 0:
            raise SimulationError(f"negative on-chain funds after {event}: {st}")
        for side, ch in st.channels.items():
            if ch.local < 0 or ch.remote < 0:
                raise SimulationError(f"negative balance on {side.value} after {event}: {st}")
            total = ch.local + ch.remote + ch.locked
            if abs(total - ch.capacity) > _CAPACITY_RTOL * max(1.0, ch.capacity):
                raise SimulationError(
                    f"capacity leak on {side.value} after {event}: total={total!r} "
                    f"capacity={ch.capacity!r} state={st}"
                )

    # -- event handlers ---------------------------------------------------

    def _on_arrival(self, event: Event) -> None:
        tx = event.tx
        self._open_arrivals -= 1
        self.state, success, earned, lost = process_transaction(self.state, tx, self.fees)
        fee = earned + lost
        self._acc.arrival_fees += fee
        self._cum_arrival_fees += fee
        if success:
            self._acc.relay_fees += earned
            self._cum_relay += earned
        else:
            self._acc.lost_fees += lost
            self._cum_lost += lost
        self._record_estimate(tx, success)
        if self.collect_transactions:
            self.transactions.append((tx.arrival_time, tx.direction, tx.amount, success))
        self._schedule_arrival(event.source_index)
        self._check_state(event)

    def _on_completion(self, event: Event) -> None:
        self.state, done = complete_swap(self.state, event.op, self.fees)
        if done.status is SwapStatus.FAILED_REFUNDED:
            self._acc.failed_swaps += 1
            self._cum_failed += 1
            outcome = "failed"
        else:
            self._acc.swap_fees += done.fee
            self._cum_swap_fees += done.fee
            outcome = "ok"
        self._acc.swap_events.append(
            f"{done.side.value}:{done.kind.value}:{done.amount!r}:{outcome}"
        )
        self._check_state(event)

    def _quiesced(self) -> bool:
        return all(self._sources_done) and self._open_arrivals == 0

    def _terminal(self, epoch: int, time: float) -> bool:
        if self.max_decisions is not None and epoch >= self.max_decisions:
            return True
        if self.horizon_minutes is not None and time >= self.horizon_minutes:
            return True
        if self.horizon_minutes is None and self._quiesced():
            return not any(ch.pending is not None for ch in self.state.channels.values())
        return False

    def _snapshot_row(self, epoch: int, ledger) -> StepRecord:
        st = self.state
        left = st.channel(Side.LEFT)
        right = st.channel(Side.RIGHT)
        net_left, net_right = self.estimates.net_demand(self.now)
        rate_lr, rate_rl = self.estimates.success_rates(self.now)
        future_left, future_right = self.estimates.future_balance_refined(
            st, self.now, self.clock.confirm_delay, self.fees
        )
        return StepRecord(
            step=epoch,
            time=self.now,
            remote_left=left.remote,
            local_left=left.local,
            local_right=right.local,
            remote_right=right.remote,
            onchain=st.onchain,
            onchain_locked=st.onchain_locked,
            locked_left=left.locked,
            locked_right=right.locked,
            fortune=st.fortune,
            cum_relay_fees=self._cum_relay,
            cum_lost_fees=self._cum_lost,
            cum_swap_fees=self._cum_swap_fees,
            cum_arrival_fees=self._cum_arrival_fees,
            cum_failed_swaps=self._cum_failed,
            cum_downgrades=self._cum_downgrades,
            step_relay_fees=ledger.relay_fees_earned,
            step_lost_fees=ledger.lost_fees,
            step_swap_fees=ledger.swap_fees_paid,
            step_arrival_fees=ledger.total_arriving_fees,
            step_failed_swaps=ledger.failed_swaps,
            step_reward=compute_reward(ledger, self.penalty),
            swaps="|".join(self._acc.swap_events),
            downgrades="|".join(self._acc.downgrades),
            est_net_left=net_left,
            est_net_right=net_right,
            est_rate_lr=rate_lr,
            est_rate_rl=rate_rl,
            est_future_left=future_left,
            est_future_right=future_right,
        )

    def _make_context(self, epoch: int) -> PolicyContext:
        return PolicyContext(
            state=self.state,
            estimates=self.estimates,
            now=self.now,
            check_interval=self.clock.check_interval,
            confirm_delay=self.clock.confirm_delay,
            fees=self.fees,
            step=epoch,
            prev_ledger=self._prev_ledger,
        )

    def _on_control(self, event: Event) -> bool:
        """Close the previous interval, then decide; returns True when the run ends."""
        epoch = event.epoch
        ledger = close_step_ledger(
            self._acc.relay_fees,
            self._acc.lost_fees,
            self._acc.swap_fees,
            self._acc.failed_swaps,
            self._acc.fortune_before,
            self.state.fortune,
            self._acc.arrival_fees,
        )
        self._prev_ledger = ledger
        row = self._snapshot_row(epoch, ledger)
        self._trace.rows.append(row)

        if self._terminal(epoch, event.time):
            finish = getattr(self.policy, "finish", None)
            if finish is not None:
                finish(self._make_context(epoch))
            return True

        if self.horizon_minutes is None and self._quiesced():
            decision = NO_SWAPS  # no traffic left to motivate a swap
        else:
            decision = self.policy(self._make_context(epoch))

        applied, violations = validate_swap_decision(self.state, decision, self.fees)
        acc = _StepAccumulator(fortune_before=0.0)
        for violation in violations:
            acc.downgrades.append(f"{violation.side.value}:{violation.code.value}")
            self._cum_downgrades += 1
        for side, req in applied.requests():
            self.state, op = begin_swap(
                self.state, side, req.kind, req.amount, self.now, self.fees, self.clock.confirm_delay
            )
            self._push(Event(op.complete_time, EventKind.SWAP_COMPLETION, self._next_seq(), op=op))
        acc.fortune_before = self.state.fortune
        self._acc = acc
        self._check_state(event)

        self._push(
            Event(
                (epoch + 1) * self.clock.check_interval,
                EventKind.CONTROL_EPOCH,
                self._next_seq(),
                epoch=epoch + 1,
            )
        )
        return False

    # -- main loop --------------------------------------------------------

    def run(self) -> MetricsTrace:
        if self._finished:
            raise ConsistencyError("simulation already ran")
        while self._heap:
            event = heapq.heappop(self._heap)
            self.now = event.time
            if event.kind is EventKind.TX_ARRIVAL:
                self._on_arrival(event)
            elif event.kind is EventKind.SWAP_COMPLETION:
                self._on_completion(event)
            else:
                if self._on_control(event):
                    self._finished = True
                    return self._trace
        raise SimulationError("event heap drained without reaching a final close")


def simulate(
    initial: NodeState,
    fees: FeeSchedule,
    clock: ClockConfig,
    sources: list[ArrivalSource],
    policy: PolicyFn,
    **options,
) -> MetricsTrace:
    """Build and run one simulation; see Simulation for options."""
    return Simulation(initial, fees, clock, sources, policy, **options).run()
