"""Experiment configuration: YAML schema, validation, and builders.

A config file fully determines a run up to the seed. Validation reports
every problem with its field path rather than stopping at the first.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .engine import (
    ArrivalSource,
    ClockConfig,
    FixedAmount,
    GaussianAmounts,
    PeriodicArrivals,
    PoissonArrivals,
    UniformAmounts,
    make_streams,
)
from .model import ChannelState, Direction, FeeSchedule, NodeState, Side
from .policies import (
    AutoloopParams,
    AutoloopPolicy,
    LoopmaxParams,
    LoopmaxPolicy,
    NonePolicy,
    PolicyFn,
)

POLICY_NAMES = ("none", "autoloop", "loopmax")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass
class AmountDistConfig:
    kind: str  # uniform | gaussian | fixed
    lo: float = 0.0
    hi: float = 0.0
    mean: float = 0.0
    std: float = 0.0
    value: float = 0.0

    def build(self):
        if self.kind == "uniform":
            return UniformAmounts(self.lo, self.hi)
        if self.kind == "gaussian":
            return GaussianAmounts(self.mean, self.std)
        return FixedAmount(self.value)


@dataclass
class ArrivalConfig:
    kind: str = "poisson"  # poisson | periodic
    rate: float = 1.0
    first: float = 0.0
    interval: float = 1.0
    amount: AmountDistConfig = field(default_factory=lambda: AmountDistConfig("gaussian", mean=25.0, std=20.0))
    count: Optional[int] = None
    stream_seed: Optional[int] = None


@dataclass
class ChannelConfig:
    capacity: float
    local: float
    remote: float


@dataclass
class PolicyConfig:
    name: str = "none"
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    channels: dict[Side, ChannelConfig]
    onchain: float
    fees: FeeSchedule
    clock: ClockConfig
    arrivals: dict[Direction, ArrivalConfig]
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    seeds: list[int] = field(default_factory=lambda: [0])
    horizon_minutes: Optional[float] = None
    reward_penalty: float = 0.0
    min_swap_fraction: float = 0.2
    onchain_norm: float = 60.0
    estimator_window: Optional[float] = None
    episode_epochs: Optional[int] = None
    sweep: Optional[dict] = None  # {"param": dotted.path, "values": [...]}
    out_dir: Optional[str] = None
    name: str = "experiment"

    def initial_state(self) -> NodeState:
        channels = {
            side: ChannelState(cfg.capacity, cfg.local, cfg.remote)
            for side, cfg in self.channels.items()
        }
        return NodeState(channels, self.onchain)

    def build_sources(self, seed: int) -> list[ArrivalSource]:
        sources: list[ArrivalSource] = []
        for direction in Direction:
            cfg = self.arrivals[direction]
            if cfg.kind == "periodic":
                sources.append(
                    PeriodicArrivals(direction, cfg.first, cfg.interval, cfg.amount.value, cfg.count)
                )
            else:
                times_rng, amounts_rng = make_streams(seed, direction, cfg.stream_seed)
                sources.append(
                    PoissonArrivals(
                        direction, cfg.rate, cfg.amount.build(), times_rng, amounts_rng, cfg.count
                    )
                )
        return sources

    def build_policy(self, override: Optional[str] = None) -> PolicyFn:
        name = override or self.policy.name
        params = self.policy.params if override in (None, self.policy.name) else {}
        if name == "none":
            return NonePolicy()
        if name == "autoloop":
            return AutoloopPolicy(
                AutoloopParams(
                    low=float(params.get("low", 0.3)), high=float(params.get("high", 0.7))
                )
            )
        if name == "loopmax":
            return LoopmaxPolicy(
                LoopmaxParams(
                    safety_margin_minutes=float(params.get("safety_margin_minutes", 2.0))
                )
            )
        raise ConfigError([f"policy.name: unknown policy {name!r}"])

    def digest(self) -> str:
        """Stable fingerprint of everything that shapes a run's dynamics."""
        payload = to_dict(self)
        for presentation in ("seeds", "sweep", "out_dir", "name"):
            payload.pop(presentation, None)
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SIDE_KEYS = {"left": Side.LEFT, "right": Side.RIGHT}
_DIRECTION_KEYS = {"l_to_r": Direction.L_TO_R, "r_to_l": Direction.R_TO_L}


def to_dict(config: ExperimentConfig) -> dict:
    """Plain-data mirror of the config (the YAML shape)."""
    return {
        "name": config.name,
        "channels": {
            key: {
                "capacity": config.channels[side].capacity,
                "local": config.channels[side].local,
                "remote": config.channels[side].remote,
            }
            for key, side in _SIDE_KEYS.items()
        },
        "onchain": config.onchain,
        "fees": {
            "relay_base": config.fees.relay_base,
            "relay_prop": config.fees.relay_prop,
            "swap_rate": config.fees.swap_rate,
            "swap_flat": config.fees.swap_flat,
        },
        "clock": {
            "check_interval": config.clock.check_interval,
            "confirm_delay": config.clock.confirm_delay,
        },
        "arrivals": {
            key: _arrival_to_dict(config.arrivals[direction])
            for key, direction in _DIRECTION_KEYS.items()
        },
        "policy": {"name": config.policy.name, **config.policy.params},
        "seeds": list(config.seeds),
        "horizon_minutes": config.horizon_minutes,
        "reward_penalty": config.reward_penalty,
        "min_swap_fraction": config.min_swap_fraction,
        "onchain_norm": config.onchain_norm,
        "estimator_window": config.estimator_window,
        "episode_epochs": config.episode_epochs,
        "sweep": config.sweep,
        "out_dir": config.out_dir,
    }


def _arrival_to_dict(cfg: ArrivalConfig) -> dict:
    amount: dict[str, Any] = {"kind": cfg.amount.kind}
    if cfg.amount.kind == "uniform":
        amount.update(lo=cfg.amount.lo, hi=cfg.amount.hi)
    elif cfg.amount.kind == "gaussian":
        amount.update(mean=cfg.amount.mean, std=cfg.amount.std)
    else:
        amount.update(value=cfg.amount.value)
    out: dict[str, Any] = {"kind": cfg.kind, "amount": amount, "count": cfg.count}
    if cfg.kind == "poisson":
        out["rate"] = cfg.rate
    else:
        out.update(first=cfg.first, interval=cfg.interval)
    if cfg.stream_seed is not None:
        out["stream_seed"] = cfg.stream_seed
    return out


def _get(raw: dict, path: str, problems: list[str], default=None, required=False):
    node = raw
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                problems.append(f"{path}: missing required field")
            return default
        node = node[part]
    return node


def from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config from plain data; raises ConfigError."""
    problems: list[str] = []

    channels: dict[Side, ChannelConfig] = {}
    for key, side in _SIDE_KEYS.items():
        cap = _get(raw, f"channels.{key}.capacity", problems, required=True)
        local = _get(raw, f"channels.{key}.local", problems, required=True)
        remote = _get(raw, f"channels.{key}.remote", problems, required=True)
        if None in (cap, local, remote):
            continue
        if cap <= 0:
            problems.append(f"channels.{key}.capacity: must be > 0")
        if local < 0 or remote < 0:
            problems.append(f"channels.{key}: balances must be >= 0")
        elif abs(local + remote - cap) > 1e-9 * max(1.0, cap):
            problems.append(
                f"channels.{key}: local + remote = {local + remote} does not equal capacity {cap}"
            )
        channels[side] = ChannelConfig(float(cap), float(local), float(remote))

    onchain = _get(raw, "onchain", problems, required=True)
    if onchain is not None and onchain < 0:
        problems.append("onchain: must be >= 0")

    fees = None
    try:
        fees = FeeSchedule(
            relay_base=float(_get(raw, "fees.relay_base", problems, 0.0)),
            relay_prop=float(_get(raw, "fees.relay_prop", problems, 0.0)),
            swap_rate=float(_get(raw, "fees.swap_rate", problems, 0.0)),
            swap_flat=float(_get(raw, "fees.swap_flat", problems, 0.0)),
        )
    except ValueError as exc:
        problems.append(f"fees: {exc}")

    clock = None
    try:
        clock = ClockConfig(
            check_interval=float(_get(raw, "clock.check_interval", problems, 10.0)),
            confirm_delay=float(_get(raw, "clock.confirm_delay", problems, 10.0)),
        )
    except ValueError as exc:
        problems.append(f"clock: {exc}")

    arrivals: dict[Direction, ArrivalConfig] = {}
    for key, direction in _DIRECTION_KEYS.items():
        node = _get(raw, f"arrivals.{key}", problems, required=True)
        if node is None:
            continue
        arrivals[direction] = _parse_arrival(node, f"arrivals.{key}", problems)

    policy_node = raw.get("policy", {"name": "none"})
    if not isinstance(policy_node, dict) or "name" not in policy_node:
        problems.append("policy.name: missing required field")
        policy = PolicyConfig()
    else:
        params = {k: v for k, v in policy_node.items() if k != "name"}
        policy = PolicyConfig(str(policy_node["name"]), params)
        if policy.name not in POLICY_NAMES:
            problems.append(f"policy.name: unknown policy {policy.name!r}")
        if policy.name == "autoloop":
            low, high = params.get("low", 0.3), params.get("high", 0.7)
            if not (0 <= low < high <= 1):
                problems.append(f"policy: need 0 <= low < high <= 1, got low={low}, high={high}")
        if policy.name == "loopmax" and params.get("safety_margin_minutes", 2.0) < 0:
            problems.append("policy.safety_margin_minutes: must be >= 0")

    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        problems.append("seeds: must be a non-empty list of non-negative integers")

    horizon = raw.get("horizon_minutes")
    if horizon is not None and horizon < 0:
        problems.append("horizon_minutes: must be >= 0")
    if horizon is None and raw.get("episode_epochs") is None:
        for key, direction in _DIRECTION_KEYS.items():
            cfg = arrivals.get(direction)
            if cfg is not None and cfg.count is None:
                problems.append(
                    f"arrivals.{key}.count: required when horizon_minutes and episode_epochs are unset"
                )

    penalty = raw.get("reward_penalty", 0.0)
    if penalty < 0:
        problems.append("reward_penalty: must be >= 0")
    min_frac = raw.get("min_swap_fraction", 0.2)
    if not 0 <= min_frac <= 1:
        problems.append("min_swap_fraction: must be in [0, 1]")
    onchain_norm = raw.get("onchain_norm", 60.0)
    if onchain_norm <= 0:
        problems.append("onchain_norm: must be > 0")
    window = raw.get("estimator_window")
    if window is not None and window <= 0:
        problems.append("estimator_window: must be > 0 minutes when set")
    episode_epochs = raw.get("episode_epochs")
    if episode_epochs is not None and episode_epochs < 0:
        problems.append("episode_epochs: must be >= 0")

    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or "param" not in sweep or "values" not in sweep:
            problems.append("sweep: needs 'param' and 'values'")

    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        channels=channels,
        onchain=float(onchain),
        fees=fees,
        clock=clock,
        arrivals=arrivals,
        policy=policy,
        seeds=list(seeds),
        horizon_minutes=None if horizon is None else float(horizon),
        reward_penalty=float(penalty),
        min_swap_fraction=float(min_frac),
        onchain_norm=float(onchain_norm),
        estimator_window=None if window is None else float(window),
        episode_epochs=episode_epochs,
        sweep=sweep,
        out_dir=raw.get("out_dir"),
        name=str(raw.get("name", "experiment")),
    )


def _parse_arrival(node: dict, path: str, problems: list[str]) -> ArrivalConfig:
    kind = node.get("kind", "poisson")
    if kind not in ("poisson", "periodic"):
        problems.append(f"{path}.kind: must be poisson or periodic")

    amount_node = node.get("amount", {})
    akind = amount_node.get("kind", "gaussian")
    amount = AmountDistConfig(kind=akind)
    if akind == "uniform":
        amount.lo = float(amount_node.get("lo", 0.0))
        amount.hi = float(amount_node.get("hi", 0.0))
        if not amount.lo < amount.hi:
            problems.append(f"{path}.amount: need lo < hi")
    elif akind == "gaussian":
        amount.mean = float(amount_node.get("mean", 25.0))
        amount.std = float(amount_node.get("std", 20.0))
        if amount.std <= 0:
            problems.append(f"{path}.amount.std: must be > 0")
    elif akind == "fixed":
        amount.value = float(amount_node.get("value", 0.0))
        if amount.value <= 0:
            problems.append(f"{path}.amount.value: must be > 0")
    else:
        problems.append(f"{path}.amount.kind: must be uniform, gaussian, or fixed")

    cfg = ArrivalConfig(kind=kind, amount=amount)
    if kind == "poisson":
        cfg.rate = float(node.get("rate", 0.0))
        if cfg.rate <= 0:
            problems.append(f"{path}.rate: must be > 0")
    else:
        cfg.first = float(node.get("first", 0.0))
        cfg.interval = float(node.get("interval", 0.0))
        if cfg.interval <= 0:
            problems.append(f"{path}.interval: must be > 0")
        if cfg.first < 0:
            problems.append(f"{path}.first: must be >= 0")
        if amount.kind != "fixed":
            problems.append(f"{path}.amount.kind: periodic arrivals need a fixed amount")

    count = node.get("count")
    if count is not None and (not isinstance(count, int) or count < 0):
        problems.append(f"{path}.count: must be a non-negative integer")
    cfg.count = count
    stream_seed = node.get("stream_seed")
    if stream_seed is not None and not isinstance(stream_seed, int):
        problems.append(f"{path}.stream_seed: must be an integer")
    cfg.stream_seed = stream_seed
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: not parseable as YAML ({exc})"])
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    cfg = from_dict(raw)
    if cfg.name == "experiment":
        cfg.name = str(raw.get("name", _stem(path)))
    return cfg


def _stem(path) -> str:
    text = str(path)
    base = text.rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def override_param(config: ExperimentConfig, param: str, value) -> ExperimentConfig:
    """Return a copy of the config with one dotted parameter replaced.

    Accepts the YAML paths (fees.relay_prop, arrivals.l_to_r.rate,
    policy.low, onchain, ...); raises ConfigError for unknown paths.
    """
    raw = to_dict(config)
    node: Any = raw
    parts = param.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError([f"sweep.param: no such parameter {param!r}"])
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError([f"sweep.param: no such parameter {param!r}"])
    node[leaf] = value
    raw = copy.deepcopy(raw)
    cfg = from_dict(raw)
    cfg.name = config.name
    return cfg
