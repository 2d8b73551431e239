"""Discrete-event simulator of a two-channel payment relay node.

The node forwards payments between two channels for a fee and keeps them
liquid with on-chain swaps. This package provides the accounting model, the
seeded event engine, demand estimators, rebalancing policies, an experiment
harness, and a wire protocol for driving the simulation from an external
learning agent.
"""

from .config import ExperimentConfig, load_config
from .engine import ClockConfig, Simulation, simulate
from .estimators import DemandEstimates, record_arrival
from .experiments import (
    profitability_thresholds,
    run_depletion_scenario,
    run_experiment,
    run_single,
    sweep,
)
from .metrics import MetricsTrace, StepRecord, read_trace_csv, validate_trace
from .model import (
    ChannelState,
    Direction,
    FeeSchedule,
    NodeState,
    Side,
    StepLedger,
    SwapDecision,
    SwapKind,
    SwapOperation,
    SwapRequest,
    Transaction,
    begin_swap,
    complete_swap,
    gross_from_net,
    net_from_gross,
    process_transaction,
    relay_fee,
    swap_fee,
    validate_swap_decision,
)
from .policies import (
    AutoloopParams,
    AutoloopPolicy,
    LoopmaxParams,
    LoopmaxPolicy,
    NonePolicy,
    PolicyContext,
    RawAction,
    action_bounds,
    compute_reward,
    decide_autoloop,
    decide_loopmax,
    decide_none,
    process_raw_action,
)
from .bridge import (
    encode_observation,
    replay_policy,
    serve,
    serve_episode,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
