"""Experiment execution: seeded runs, parameter sweeps, fee viability math,
and the fixed symmetric-depletion demonstration scenario.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Optional

from .config import ExperimentConfig, from_dict, override_param
from .engine import Simulation
from .metrics import MetricsTrace, summarize_final_fortunes
from .model import Direction, FeeSchedule

logger = logging.getLogger(__name__)


def run_single(
    config: ExperimentConfig,
    seed: int,
    policy_override: Optional[str] = None,
    *,
    collect_transactions: bool = False,
) -> MetricsTrace:
    """One seeded simulation under the config's (or overridden) policy."""
    policy = config.build_policy(policy_override)
    sim = Simulation(
        config.initial_state(),
        config.fees,
        config.clock,
        config.build_sources(seed),
        policy,
        horizon_minutes=config.horizon_minutes,
        max_decisions=config.episode_epochs,
        penalty=config.reward_penalty,
        estimator_window=config.estimator_window,
        collect_transactions=collect_transactions,
        meta={
            "name": config.name,
            "policy": getattr(policy, "name", "custom"),
            "seed": seed,
            "config_digest": config.digest(),
        },
    )
    trace = sim.run()
    if collect_transactions:
        trace.meta["transactions"] = sim.transactions
    return trace


def trace_filename(config: ExperimentConfig, seed: int, policy_override: Optional[str] = None) -> str:
    policy = policy_override or config.policy.name
    return f"trace_{config.name}_{policy}_seed{seed}.csv"


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[str] = None,
    policy_override: Optional[str] = None,
) -> tuple[list[MetricsTrace], dict]:
    """Run every configured seed; optionally persist traces and a summary."""
    traces = [run_single(config, seed, policy_override) for seed in config.seeds]
    summary = summarize_final_fortunes(traces)
    summary["seeds"] = list(config.seeds)
    summary["policy"] = policy_override or config.policy.name
    summary["name"] = config.name
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for seed, trace in zip(config.seeds, traces):
            trace.write_csv(os.path.join(out_dir, trace_filename(config, seed, policy_override)))
        with open(os.path.join(out_dir, f"summary_{config.name}_{summary['policy']}.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return traces, summary


def sweep(
    config: ExperimentConfig,
    param: str,
    values: list,
    out_dir: Optional[str] = None,
    policy_override: Optional[str] = None,
) -> list[dict]:
    """run_experiment once per parameter value; returns one summary row each."""
    table: list[dict] = []
    for value in values:
        point = override_param(config, param, value)
        point.name = config.name
        sub_dir = None
        if out_dir is not None:
            sub_dir = os.path.join(out_dir, f"{param.replace('.', '_')}_{value}")
        _, summary = run_experiment(point, sub_dir, policy_override)
        row = {"param": param, "value": value}
        row.update({k: summary[k] for k in ("mean", "min", "max", "final_fortunes")})
        table.append(row)
    if out_dir is not None and table:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"sweep_{config.name}_{param.replace('.', '_')}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("value,mean,min,max\n")
            for row in table:
                fh.write(f"{row['value']!r},{row['mean']!r},{row['min']!r},{row['max']!r}\n")
    return table


@dataclass(frozen=True)
class ProfitabilityThresholds:
    """Necessary (not sufficient) swap sizes for a swap to pay for itself.

    None means no amount can be profitable at these fees. A swap enabling
    traffic r earns at most r * relay_prop, so the fee paid must stay below
    that; solving per swap type gives these minimum amounts.
    """

    swap_in: Optional[float]
    swap_out: Optional[float]


def profitability_thresholds(fees: FeeSchedule) -> ProfitabilityThresholds:
    swap_in = None
    if fees.relay_prop > fees.swap_rate:
        swap_in = fees.swap_flat / (fees.relay_prop - fees.swap_rate)
    swap_out = None
    denominator = fees.relay_prop * (1.0 + fees.swap_rate) - fees.swap_rate
    if denominator > 0:
        swap_out = fees.swap_flat / denominator
    return ProfitabilityThresholds(swap_in=swap_in, swap_out=swap_out)


def depletion_scenario_config(
    relay_prop: float = 0.5,
    transactions: int = 100,
    amount: float = 20.0,
    capacity: float = 40.0,
) -> ExperimentConfig:
    """Two even channels fed alternating fixed-size traffic from both ends.

    With a high proportional fee the withheld amounts starve the forward
    balances even though end-to-end demand is perfectly symmetric.
    """
    half = capacity / 2.0
    per_direction = transactions // 2
    return from_dict(
        {
            "name": "symmetric_depletion",
            "channels": {
                "left": {"capacity": capacity, "local": half, "remote": half},
                "right": {"capacity": capacity, "local": half, "remote": half},
            },
            "onchain": 100.0,
            "fees": {"relay_base": 0.0, "relay_prop": relay_prop, "swap_rate": 0.005, "swap_flat": 2.0},
            "clock": {"check_interval": 10.0, "confirm_delay": 10.0},
            "arrivals": {
                # Alternating: L->R on odd half-minutes, R->L on even ones.
                "l_to_r": {
                    "kind": "periodic",
                    "first": 0.5,
                    "interval": 2.0,
                    "amount": {"kind": "fixed", "value": amount},
                    "count": transactions - per_direction,
                },
                "r_to_l": {
                    "kind": "periodic",
                    "first": 1.5,
                    "interval": 2.0,
                    "amount": {"kind": "fixed", "value": amount},
                    "count": per_direction,
                },
            },
            "policy": {"name": "none"},
            "seeds": [0],
        }
    )


@dataclass
class DepletionReport:
    trace: MetricsTrace
    transactions: list[tuple[float, Direction, float, bool]]
    successes: int
    stuck_after: Optional[int]  # 1-based index of the last success; None if never stuck

    @property
    def stuck(self) -> bool:
        return self.stuck_after is not None


def run_depletion_scenario(
    relay_prop: float = 0.5, transactions: int = 100, amount: float = 20.0, capacity: float = 40.0
) -> DepletionReport:
    """Run the alternating-demand scenario and locate where traffic stalls."""
    config = depletion_scenario_config(relay_prop, transactions, amount, capacity)
    trace = run_single(config, seed=config.seeds[0], collect_transactions=True)
    tx_log = trace.meta["transactions"]
    successes = sum(1 for _, _, _, ok in tx_log if ok)
    last_success = max((i + 1 for i, (_, _, _, ok) in enumerate(tx_log) if ok), default=0)
    # Failures leave balances untouched, so an all-failure tail is permanent.
    stuck_after = last_success if last_success < len(tx_log) else None
    return DepletionReport(trace, tx_log, successes, stuck_after)
