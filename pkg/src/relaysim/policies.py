"""Rebalancing policies and the action machinery for agent-driven control.

Three built-in policies (none, threshold-based autoloop, demand-aware
loopmax) plus the mapping from a learned agent's raw [-1,1] actions to
constrained swap requests and the per-step reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Union

from .estimators import DemandEstimates, WindowedDemandEstimates
from .model import (
    FeeSchedule,
    NodeState,
    Side,
    StepLedger,
    SwapDecision,
    SwapKind,
    SwapRequest,
    NO_SWAPS,
    max_affordable_swap_in,
)

Estimates = Union[DemandEstimates, WindowedDemandEstimates]


@dataclass(slots=True)
class PolicyContext:
    """Snapshot handed to a policy at a control epoch."""

    state: NodeState
    estimates: Estimates
    now: float
    check_interval: float
    confirm_delay: float
    fees: FeeSchedule
    step: int = 0
    prev_ledger: Optional[StepLedger] = None


PolicyFn = Callable[[PolicyContext], SwapDecision]


class Policy(Protocol):
    def __call__(self, ctx: PolicyContext) -> SwapDecision: ...


def decide_none(ctx: PolicyContext) -> SwapDecision:
    """Never rebalance."""
    return NO_SWAPS


@dataclass(frozen=True)
class AutoloopParams:
    low: float = 0.3
    high: float = 0.7

    def __post_init__(self) -> None:
        if not (0 <= self.low < self.high <= 1):
            raise ValueError(f"need 0 <= low < high <= 1, got {self.low}, {self.high}")


def decide_autoloop(ctx: PolicyContext, params: AutoloopParams) -> SwapDecision:
    """Refill to the midpoint when local dips below low, offload above high."""
    requests: dict[Side, Optional[SwapRequest]] = {}
    for side in Side:
        ch = ctx.state.channel(side)
        midpoint = ch.capacity * (params.low + params.high) / 2.0
        if ch.local < params.low * ch.capacity:
            requests[side] = SwapRequest(SwapKind.SWAP_IN, midpoint - ch.local)
        elif ch.local > params.high * ch.capacity:
            requests[side] = SwapRequest(SwapKind.SWAP_OUT, ch.local - midpoint)
        else:
            requests[side] = None
    return SwapDecision(requests[Side.LEFT], requests[Side.RIGHT])


@dataclass(frozen=True)
class LoopmaxParams:
    safety_margin_minutes: float = 2.0

    def __post_init__(self) -> None:
        if self.safety_margin_minutes < 0:
            raise ValueError("safety_margin_minutes must be >= 0")


def decide_loopmax(ctx: PolicyContext, params: LoopmaxParams) -> SwapDecision:
    """Swap the maximum amount, and only when depletion or saturation is near.

    A side whose local balance is draining gets a swap-in once the estimated
    time to depletion falls inside one check-plus-confirmation window; a side
    filling up gets a swap-out before saturation. A margin of a few minutes'
    worth of traffic is left untouched on the balance funding the swap.
    """
    lead_time = ctx.check_interval + ctx.confirm_delay
    affordable = max_affordable_swap_in(ctx.state.onchain, ctx.fees)
    requests: dict[Side, Optional[SwapRequest]] = {Side.LEFT: None, Side.RIGHT: None}

    for side in Side:
        ch = ctx.state.channel(side)
        drift = ctx.estimates.local_drift(side, ctx.now)
        margin = abs(drift) * params.safety_margin_minutes
        if drift < 0:
            time_to_depletion = ch.local / -drift
            if time_to_depletion < lead_time:
                amount = min(affordable, ch.remote - margin)
                if amount > 0:
                    requests[side] = SwapRequest(SwapKind.SWAP_IN, amount)
        elif drift > 0:
            time_to_saturation = ch.remote / drift
            if time_to_saturation < lead_time:
                amount = ch.local - margin
                if amount > 0:
                    requests[side] = SwapRequest(SwapKind.SWAP_OUT, amount)

    return SwapDecision(requests[Side.LEFT], requests[Side.RIGHT])


@dataclass(frozen=True)
class RawAction:
    """Agent output, one coordinate per side: negative = out, positive = in."""

    left: float
    right: float

    def __post_init__(self) -> None:
        for value in (self.left, self.right):
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"raw action {value} outside [-1, 1]")

    def get(self, side: Side) -> float:
        return self.left if side is Side.LEFT else self.right


def action_bounds(ctx: PolicyContext) -> dict[Side, tuple[float, float]]:
    """Per-side swap range [-local, min(projected remote, affordable, capacity)].

    The lower bound caps a swap-out by the local balance; the upper bound
    caps a swap-in by the remote balance projected to the completion time,
    by what the on-chain funds can pay for, and by the channel capacity.
    """
    projected_left, projected_right = ctx.estimates.future_balance_refined(
        ctx.state, ctx.now, ctx.confirm_delay, ctx.fees
    )
    affordable = max_affordable_swap_in(ctx.state.onchain, ctx.fees)
    bounds: dict[Side, tuple[float, float]] = {}
    for side, projected in ((Side.LEFT, projected_left), (Side.RIGHT, projected_right)):
        ch = ctx.state.channel(side)
        bounds[side] = (-ch.local, min(projected, affordable, ch.capacity))
    return bounds


def process_raw_action(
    raw: RawAction, ctx: PolicyContext, min_swap_fraction: float
) -> SwapDecision:
    """Scale raw coordinates into swap amounts, zeroing sub-threshold ones.

    A negative coordinate requests a swap-out of |r| times the local balance
    (kept only if >= threshold); a non-negative one requests a swap-in of r
    times the upper action bound (kept only if > threshold). The threshold is
    min_swap_fraction of the channel capacity.
    """
    bounds = action_bounds(ctx)
    requests: dict[Side, Optional[SwapRequest]] = {Side.LEFT: None, Side.RIGHT: None}
    for side in Side:
        r = raw.get(side)
        ch = ctx.state.channel(side)
        threshold = min_swap_fraction * ch.capacity
        if r < 0:
            amount = -r * ch.local
            if amount >= threshold and amount > 0:
                requests[side] = SwapRequest(SwapKind.SWAP_OUT, amount)
        else:
            amount = r * bounds[side][1]
            if amount > threshold:
                requests[side] = SwapRequest(SwapKind.SWAP_IN, amount)
    return SwapDecision(requests[Side.LEFT], requests[Side.RIGHT])


def compute_reward(ledger: StepLedger, penalty: float) -> float:
    """Fortune gained, minus fees lost to drops, minus a charge per failed swap."""
    return ledger.fortune_delta - ledger.lost_fees - penalty * ledger.failed_swaps


class NonePolicy:
    name = "none"

    def __call__(self, ctx: PolicyContext) -> SwapDecision:
        return decide_none(ctx)


@dataclass
class AutoloopPolicy:
    params: AutoloopParams = field(default_factory=AutoloopParams)
    name = "autoloop"

    def __call__(self, ctx: PolicyContext) -> SwapDecision:
        return decide_autoloop(ctx, self.params)


@dataclass
class LoopmaxPolicy:
    params: LoopmaxParams = field(default_factory=LoopmaxParams)
    name = "loopmax"

    def __call__(self, ctx: PolicyContext) -> SwapDecision:
        return decide_loopmax(ctx, self.params)


@dataclass
class RawActionPolicy:
    """Drives the simulation from a stream of raw actions (tests, replays)."""

    source: Callable[[PolicyContext], RawAction]
    min_swap_fraction: float = 0.2
    name = "raw-action"

    def __call__(self, ctx: PolicyContext) -> SwapDecision:
        return process_raw_action(self.source(ctx), ctx, self.min_swap_fraction)
