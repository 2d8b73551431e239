"""Hyperparameter bundles for the soft actor-critic learner.

Two tuning profiles are shipped: `skewed` for one-sided traffic and `even`
for balanced traffic (higher learning rate, automatic temperature tuning,
and a nonzero expectation that the environment charges for failed swaps).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SacConfig:
    obs_dim: int = 7
    action_dim: int = 2
    learning_rate: float = 0.0003
    discount: float = 0.99
    replay_capacity: int = 100_000
    hidden_layers: int = 2
    hidden_units: int = 256
    batch_size: int = 10
    temperature: float = 0.05
    target_smoothing: float = 0.005
    target_update_interval: int = 1
    gradient_steps: int = 1
    autotune_temperature: bool = False
    initial_random_steps: int = 10
    reward_scale: float = 1.0  # applied before updates; 1.0 = raw rewards
    penalty: float = 0.0  # what the environment is expected to charge per failed swap

    def __post_init__(self) -> None:
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        for name in ("learning_rate", "replay_capacity", "hidden_layers", "hidden_units",
                     "batch_size", "target_update_interval", "gradient_steps", "reward_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


PROFILES: dict[str, SacConfig] = {
    "skewed": SacConfig(
        learning_rate=0.0003,
        temperature=0.05,
        autotune_temperature=False,
        penalty=0.0,
    ),
    "even": SacConfig(
        learning_rate=0.006,
        temperature=0.005,
        autotune_temperature=True,
        penalty=10.0,
    ),
}


def profile(name: str) -> SacConfig:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; known: {sorted(PROFILES)}")
