import copy

import pytest

from relaysim.config import ExperimentConfig, from_dict
from relaysim.model import ChannelState, FeeSchedule, NodeState, Side

# Fee setup used throughout: zero base fee, 1% relay, 0.5% + 2 per swap.
BASE_FEES = FeeSchedule(relay_base=0.0, relay_prop=0.01, swap_rate=0.005, swap_flat=2.0)

# Desk-scale skewed demand: 4:1 traffic toward the right, 5000 transactions.
SKEWED_DESK = {
    "name": "skewed_desk",
    "channels": {
        "left": {"capacity": 1000.0, "local": 500.0, "remote": 500.0},
        "right": {"capacity": 1000.0, "local": 500.0, "remote": 500.0},
    },
    "onchain": 4000.0,
    "fees": {"relay_base": 0.0, "relay_prop": 0.01, "swap_rate": 0.005, "swap_flat": 2.0},
    "clock": {"check_interval": 10.0, "confirm_delay": 10.0},
    "arrivals": {
        "l_to_r": {
            "kind": "poisson",
            "rate": 10.0,
            "amount": {"kind": "gaussian", "mean": 25.0, "std": 20.0},
            "count": 4000,
        },
        "r_to_l": {
            "kind": "poisson",
            "rate": 2.5,
            "amount": {"kind": "gaussian", "mean": 25.0, "std": 20.0},
            "count": 1000,
        },
    },
    "policy": {"name": "autoloop", "low": 0.3, "high": 0.7},
    "seeds": [0],
}


def make_state(
    local_l=500.0,
    remote_l=500.0,
    local_r=500.0,
    remote_r=500.0,
    onchain=4000.0,
    cap_l=None,
    cap_r=None,
) -> NodeState:
    channels = {
        Side.LEFT: ChannelState(cap_l or local_l + remote_l, local_l, remote_l),
        Side.RIGHT: ChannelState(cap_r or local_r + remote_r, local_r, remote_r),
    }
    return NodeState(channels, onchain)


def desk_config(**overrides) -> ExperimentConfig:
    raw = copy.deepcopy(SKEWED_DESK)
    for key, value in overrides.items():
        node = raw
        parts = key.split("__")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return from_dict(raw)


@pytest.fixture
def fees() -> FeeSchedule:
    return BASE_FEES
