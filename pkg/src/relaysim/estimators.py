"""Running demand statistics and balance projections.

The node tracks, per direction, the cumulative arriving amount, the
fee-adjusted arriving amount, and the successfully relayed amount. From
these it derives per-minute drift rates for each channel balance and
projections of the remote balances one confirmation delay ahead.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from .model import ChannelState, Direction, FeeSchedule, NodeState, Side, Transaction, relay_fee


def _clamp(x: float, lo: float, hi: float) -> float:
    return max(lo, min(x, hi))


@dataclass(slots=True)
class DemandEstimates:
    """Full-history accumulators, measured from simulation time zero."""

    elapsed: float = 0.0
    arrived_lr: float = 0.0        # sum of arriving L->R amounts
    arrived_rl: float = 0.0
    arrived_net_lr: float = 0.0    # sum of (amount - relay fee), L->R
    arrived_net_rl: float = 0.0
    succeeded_lr: float = 0.0      # sum of successfully relayed amounts
    succeeded_rl: float = 0.0

    def net_demand(self, now: float) -> tuple[float, float]:
        """Estimated drift of the remote balances, per minute.

        Returns (left, right): the left channel's remote side gains what
        R->L traffic delivers (net of this node's fee) and loses what L->R
        traffic sends, and symmetrically for the right. Rates are defined
        as 0 before any time has passed.
        """
        if now <= 0:
            return 0.0, 0.0
        net_left = (self.arrived_net_rl - self.arrived_lr) / now
        net_right = (self.arrived_net_lr - self.arrived_rl) / now
        return net_left, net_right

    def local_drift(self, side: Side, now: float) -> float:
        """Estimated drift of the node's local balance on `side`, per minute."""
        net_left, net_right = self.net_demand(now)
        return -net_left if side is Side.LEFT else -net_right

    def success_rates(self, now: float) -> tuple[float, float]:
        """Successfully relayed amount per minute, (L->R, R->L); 0 at time 0."""
        if now <= 0:
            return 0.0, 0.0
        return self.succeeded_lr / now, self.succeeded_rl / now

    def future_balance_simple(
        self, side: Side, channel: ChannelState, now: float, horizon: float
    ) -> float:
        """Remote balance projected `horizon` minutes ahead by linear drift."""
        net_left, net_right = self.net_demand(now)
        drift = net_left if side is Side.LEFT else net_right
        return _clamp(channel.remote + drift * horizon, 0.0, channel.capacity)

    def future_balance_refined(
        self, state: NodeState, now: float, horizon: float, fees: FeeSchedule
    ) -> tuple[float, float]:
        """Remote balances projected ahead using succeeded-traffic rates.

        Each direction's flow runs until the horizon or until it exhausts a
        balance on its path, whichever is first; rate * min(horizon, b/rate, ...)
        is computed as min(rate * horizon, b, ...) so zero rates need no
        special casing.
        """
        left = state.channel(Side.LEFT)
        right = state.channel(Side.RIGHT)
        rate_lr, rate_rl = self.success_rates(now)
        keep = 1.0 - fees.relay_prop

        flow_lr = min(rate_lr * horizon, left.remote, right.local)
        flow_rl = min(rate_rl * horizon, right.remote, left.local)
        projected_left = _clamp(left.remote - flow_lr + keep * flow_rl, 0.0, left.capacity)
        projected_right = _clamp(right.remote - flow_rl + keep * flow_lr, 0.0, right.capacity)
        return projected_left, projected_right


def record_arrival(
    est: DemandEstimates, tx: Transaction, success: bool, fees: FeeSchedule
) -> DemandEstimates:
    """Fold one arrival (successful or not) into the accumulators."""
    fee = relay_fee(tx.amount, fees)
    if tx.direction is Direction.L_TO_R:
        return replace(
            est,
            elapsed=tx.arrival_time,
            arrived_lr=est.arrived_lr + tx.amount,
            arrived_net_lr=est.arrived_net_lr + tx.amount - fee,
            succeeded_lr=est.succeeded_lr + (tx.amount if success else 0.0),
        )
    return replace(
        est,
        elapsed=tx.arrival_time,
        arrived_rl=est.arrived_rl + tx.amount,
        arrived_net_rl=est.arrived_net_rl + tx.amount - fee,
        succeeded_rl=est.succeeded_rl + (tx.amount if success else 0.0),
    )


class WindowedDemandEstimates:
    """Same statistics over a sliding window of the most recent minutes.

    Rates divide by min(now, window) so a freshly started window behaves
    like the full-history estimator.
    """

    def __init__(self, window: float) -> None:
        if window <= 0:
            raise ValueError("window must be > 0 minutes")
        self.window = window
        self._events: deque[tuple[float, Direction, float, float, float]] = deque()
        self._cached_at: float = -1.0
        self._cached: DemandEstimates | None = None

    def record(self, tx: Transaction, success: bool, fees: FeeSchedule) -> None:
        fee = relay_fee(tx.amount, fees)
        won = tx.amount if success else 0.0
        self._events.append((tx.arrival_time, tx.direction, tx.amount, tx.amount - fee, won))
        self._cached = None

    def _snapshot(self, now: float) -> DemandEstimates:
        if self._cached is not None and self._cached_at == now:
            return self._cached
        cutoff = now - self.window
        while self._events and self._events[0][0] < cutoff:
            self._events.popleft()
        est = DemandEstimates(elapsed=now)
        for _, direction, amount, net, won in self._events:
            if direction is Direction.L_TO_R:
                est.arrived_lr += amount
                est.arrived_net_lr += net
                est.succeeded_lr += won
            else:
                est.arrived_rl += amount
                est.arrived_net_rl += net
                est.succeeded_rl += won
        self._cached_at = now
        self._cached = est
        return est

    def _span(self, now: float) -> float:
        return min(now, self.window)

    def net_demand(self, now: float) -> tuple[float, float]:
        return self._snapshot(now).net_demand(self._span(now))

    def local_drift(self, side: Side, now: float) -> float:
        return self._snapshot(now).local_drift(side, self._span(now))

    def success_rates(self, now: float) -> tuple[float, float]:
        return self._snapshot(now).success_rates(self._span(now))

    def future_balance_simple(
        self, side: Side, channel: ChannelState, now: float, horizon: float
    ) -> float:
        return self._snapshot(now).future_balance_simple(side, channel, self._span(now), horizon)

    def future_balance_refined(
        self, state: NodeState, now: float, horizon: float, fees: FeeSchedule
    ) -> tuple[float, float]:
        return self._snapshot(now).future_balance_refined(state, self._span(now), horizon, fees)
