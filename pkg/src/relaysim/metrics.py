"""Per-step run traces, their CSV serialization, and post-hoc validation.

One row per control epoch plus a final closing row. Balance and estimator
columns are snapshots taken at the row's time, before that epoch's swap
requests are applied; ledger columns (fees, reward, swap outcomes) describe
the interval that ended at the row's time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields
from typing import Iterable

COLUMNS = (
    "step",
    "time",
    "remote_left",
    "local_left",
    "local_right",
    "remote_right",
    "onchain",
    "onchain_locked",
    "locked_left",
    "locked_right",
    "fortune",
    "cum_relay_fees",
    "cum_lost_fees",
    "cum_swap_fees",
    "cum_arrival_fees",
    "cum_failed_swaps",
    "cum_downgrades",
    "step_relay_fees",
    "step_lost_fees",
    "step_swap_fees",
    "step_arrival_fees",
    "step_failed_swaps",
    "step_reward",
    "swaps",
    "downgrades",
    "est_net_left",
    "est_net_right",
    "est_rate_lr",
    "est_rate_rl",
    "est_future_left",
    "est_future_right",
)

_INT_COLUMNS = {"step", "cum_failed_swaps", "cum_downgrades", "step_failed_swaps"}
_STR_COLUMNS = {"swaps", "downgrades"}


@dataclass(slots=True)
class StepRecord:
    step: int
    time: float
    remote_left: float
    local_left: float
    local_right: float
    remote_right: float
    onchain: float
    onchain_locked: float
    locked_left: float
    locked_right: float
    fortune: float
    cum_relay_fees: float
    cum_lost_fees: float
    cum_swap_fees: float
    cum_arrival_fees: float
    cum_failed_swaps: int
    cum_downgrades: int
    step_relay_fees: float
    step_lost_fees: float
    step_swap_fees: float
    step_arrival_fees: float
    step_failed_swaps: int
    step_reward: float
    swaps: str
    downgrades: str
    est_net_left: float
    est_net_right: float
    est_rate_lr: float
    est_rate_rl: float
    est_future_left: float
    est_future_right: float


assert tuple(f.name for f in fields(StepRecord)) == COLUMNS


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value + 0.0)  # normalizes -0.0
    return str(value)


@dataclass
class MetricsTrace:
    """A full run: per-step rows plus run metadata (not serialized)."""

    rows: list[StepRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def final_fortune(self) -> float:
        if not self.rows:
            raise ValueError("empty trace")
        return self.rows[-1].fortune

    def to_csv_text(self) -> str:
        out = io.StringIO()
        out.write(",".join(COLUMNS) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(getattr(row, name)) for name in COLUMNS) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())


def read_trace_csv(path) -> MetricsTrace:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        names = header.split(",")
        if names != list(COLUMNS):
            raise ValueError(f"unexpected columns in {path}: {names}")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            kwargs = {}
            for name, text in zip(names, parts):
                if name in _STR_COLUMNS:
                    kwargs[name] = text
                elif name in _INT_COLUMNS:
                    kwargs[name] = int(text)
                else:
                    kwargs[name] = float(text)
            rows.append(StepRecord(**kwargs))
    return MetricsTrace(rows=rows, meta={"path": str(path)})


def validate_trace(trace: MetricsTrace, tolerance: float = 1e-9) -> list[str]:
    """Re-check the conservation identities a well-formed trace must satisfy.

    Returns a list of human-readable violations (empty when clean): channel
    capacity constancy, the stepwise fortune/fee identity, and monotone
    cumulative columns.
    """
    problems: list[str] = []
    rows = trace.rows
    if not rows:
        return ["trace has no rows"]

    cap_left = rows[0].remote_left + rows[0].local_left + rows[0].locked_left
    cap_right = rows[0].remote_right + rows[0].local_right + rows[0].locked_right
    base = rows[0].fortune
    prev = None
    for row in rows:
        left = row.remote_left + row.local_left + row.locked_left
        right = row.remote_right + row.local_right + row.locked_right
        if abs(left - cap_left) > tolerance * max(1.0, cap_left):
            problems.append(f"step {row.step}: left channel total {left!r} != capacity {cap_left!r}")
        if abs(right - cap_right) > tolerance * max(1.0, cap_right):
            problems.append(f"step {row.step}: right channel total {right!r} != capacity {cap_right!r}")

        gap = (row.fortune + row.cum_lost_fees + row.cum_swap_fees - row.cum_arrival_fees) - base
        if abs(gap) > tolerance * max(1.0, abs(base), row.cum_arrival_fees):
            problems.append(f"step {row.step}: fortune/fee identity off by {gap!r}")

        if min(row.remote_left, row.local_left, row.remote_right, row.local_right,
               row.onchain, row.onchain_locked, row.locked_left, row.locked_right) < 0:
            problems.append(f"step {row.step}: negative balance")

        if prev is not None:
            for name in ("cum_relay_fees", "cum_lost_fees", "cum_swap_fees",
                         "cum_arrival_fees", "cum_failed_swaps", "cum_downgrades"):
                if getattr(row, name) < getattr(prev, name):
                    problems.append(f"step {row.step}: {name} decreased")
            if row.time < prev.time:
                problems.append(f"step {row.step}: time went backwards")
        prev = row
    return problems


def summarize_final_fortunes(traces: Iterable[MetricsTrace]) -> dict:
    finals = [t.final_fortune for t in traces]
    if not finals:
        raise ValueError("no traces to summarize")
    return {
        "runs": len(finals),
        "final_fortunes": finals,
        "mean": sum(finals) / len(finals),
        "min": min(finals),
        "max": max(finals),
    }
