"""Expose the simulation to an external agent over a line-delimited protocol.

One JSON object per line, UTF-8. Message types:

  hello  server -> agent   {"type":"hello","version":1,"config":{...}}
  reset  agent  -> server  {"type":"reset","seed":123}     seed may be null
  obs    server -> agent   {"type":"obs","step":i,"o":[7 floats],"r":float,
                            "done":bool,"info":{"failed_swaps":int,
                            "lost_fees":float,"fortune":float}}
  act    agent  -> server  {"type":"act","a":[x,y]}        x,y in [-1,1]
  bye    either direction  {"type":"bye"}
  error  server -> agent   {"type":"error","message":"..."}

After a reset the server sends obs step 0; the agent answers every
non-final obs with exactly one act; the reward in obs i+1 is the return of
the action taken at obs i. The final obs of an episode has done=true and
expects no act; the agent may then reset again or say bye.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import subprocess
import time
from collections import deque
from typing import Callable, Optional

from .config import ExperimentConfig, to_dict
from .engine import Simulation
from .metrics import MetricsTrace
from .model import NodeState, Side
from .policies import Estimates, PolicyContext, RawAction, compute_reward, process_raw_action

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    """The peer broke the wire protocol (malformed message, timeout, EOF)."""


class DivergenceError(RuntimeError):
    """A replayed episode stopped matching its log."""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


def encode_observation(
    state: NodeState,
    estimates: Estimates,
    now: float,
    confirm_delay: float,
    fees,
    onchain_norm: float,
) -> tuple[float, ...]:
    """Normalize the five balances plus the two projected remote balances.

    Channel quantities are divided by their capacity; the on-chain amount is
    divided by onchain_norm and clamped to 1.
    """
    left = state.channel(Side.LEFT)
    right = state.channel(Side.RIGHT)
    projected_left, projected_right = estimates.future_balance_refined(
        state, now, confirm_delay, fees
    )
    return (
        left.remote / left.capacity,
        left.local / left.capacity,
        right.local / right.capacity,
        right.remote / right.capacity,
        min(state.onchain / onchain_norm, 1.0),
        projected_left / left.capacity,
        projected_right / right.capacity,
    )


# -- transports -------------------------------------------------------------


class FdTransport:
    """Line transport over raw file descriptors (pipes, stdio, or sockets)."""

    def __init__(self, read_fd: int, write_fd: int, owner=None) -> None:
        self._read_fd = read_fd
        self._write_fd = write_fd
        self._buffer = b""
        self._owner = owner  # kept alive so fds stay open (process or socket)

    def send(self, message: dict) -> None:
        data = json.dumps(message, separators=(",", ":")).encode() + b"\n"
        while data:
            written = os.write(self._write_fd, data)
            data = data[written:]

    def recv(self, timeout: Optional[float] = None) -> Optional[dict]:
        deadline = None if timeout is None else time.monotonic() + timeout
        while b"\n" not in self._buffer:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ProtocolError(f"timed out after {timeout}s waiting for the peer")
                ready, _, _ = select.select([self._read_fd], [], [], remaining)
                if not ready:
                    raise ProtocolError(f"timed out after {timeout}s waiting for the peer")
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                if self._buffer:
                    raise ProtocolError("peer closed mid-line")
                return None
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"not valid JSON: {line[:200]!r} ({exc})")
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolError(f"message must be an object with a 'type': {line[:200]!r}")
        return message

    def close(self) -> None:
        for fd in {self._read_fd, self._write_fd}:
            try:
                os.close(fd)
            except OSError:
                pass


class CallbackTransport:
    """In-process transport for tests: a callback plays the agent.

    Every message sent to the agent is passed to the callback, whose returned
    replies are queued for the next recv calls. The transcript records both
    directions, in order, for protocol assertions.
    """

    def __init__(self, agent: Callable[[dict], list[dict]]) -> None:
        self._agent = agent
        self._replies: deque[dict] = deque()
        self.transcript: list[tuple[str, dict]] = []

    def send(self, message: dict) -> None:
        message = json.loads(json.dumps(message))  # wire round-trip
        self.transcript.append(("send", message))
        self._replies.extend(self._agent(message))

    def recv(self, timeout: Optional[float] = None) -> Optional[dict]:
        if not self._replies:
            return None
        message = self._replies.popleft()
        self.transcript.append(("recv", message))
        return message

    def close(self) -> None:
        pass


# -- serving ---------------------------------------------------------------


def _step_info(ctx: PolicyContext) -> dict:
    ledger = ctx.prev_ledger
    return {
        "failed_swaps": 0 if ledger is None else ledger.failed_swaps,
        "lost_fees": 0.0 if ledger is None else ledger.lost_fees,
        "fortune": ctx.state.fortune,
    }


class BridgePolicy:
    """Engine policy that forwards observations to the agent and maps acts."""

    name = "agent"

    def __init__(self, transport, config: ExperimentConfig, timeout: Optional[float]) -> None:
        self._transport = transport
        self._config = config
        self._timeout = timeout
        self.log: list[dict] = []

    def _observe(self, ctx: PolicyContext) -> tuple[list[float], float]:
        obs = encode_observation(
            ctx.state, ctx.estimates, ctx.now, ctx.confirm_delay, ctx.fees,
            self._config.onchain_norm,
        )
        reward = 0.0
        if ctx.prev_ledger is not None:
            reward = compute_reward(ctx.prev_ledger, self._config.reward_penalty)
        return list(obs), reward

    def __call__(self, ctx: PolicyContext):
        obs, reward = self._observe(ctx)
        self._transport.send(
            {
                "type": "obs",
                "step": ctx.step,
                "o": obs,
                "r": reward,
                "done": False,
                "info": _step_info(ctx),
            }
        )
        message = self._transport.recv(timeout=self._timeout)
        raw = self._parse_act(message)
        self.log.append({"step": ctx.step, "o": obs, "r": reward, "a": [raw.left, raw.right]})
        return process_raw_action(raw, ctx, self._config.min_swap_fraction)

    def _parse_act(self, message: Optional[dict]) -> RawAction:
        if message is None:
            raise self._protocol_error("agent closed the connection mid-episode")
        if message.get("type") != "act":
            raise self._protocol_error(f"expected act, got {message.get('type')!r}")
        a = message.get("a")
        if not isinstance(a, list) or len(a) != 2:
            raise self._protocol_error("act needs a two-element 'a' array")
        try:
            left, right = float(a[0]), float(a[1])
        except (TypeError, ValueError):
            raise self._protocol_error(f"act coordinates must be numbers: {a!r}")
        if any(math.isnan(v) or not -1.0 <= v <= 1.0 for v in (left, right)):
            raise self._protocol_error(f"act coordinates must lie in [-1, 1]: {a!r}")
        return RawAction(left, right)

    def _protocol_error(self, message: str) -> ProtocolError:
        self._transport.send({"type": "error", "message": message})
        return ProtocolError(message)

    def finish(self, ctx: PolicyContext) -> None:
        obs, reward = self._observe(ctx)
        self._transport.send(
            {
                "type": "obs",
                "step": ctx.step,
                "o": obs,
                "r": reward,
                "done": True,
                "info": _step_info(ctx),
            }
        )
        self.log.append({"step": ctx.step, "o": obs, "r": reward})


def serve_episode(
    config: ExperimentConfig,
    transport,
    seed: int,
    *,
    timeout: Optional[float] = 60.0,
) -> tuple[MetricsTrace, list[dict]]:
    """Run one agent-driven episode; returns the trace and the action log.

    The action log starts with a header entry binding it to (config, seed),
    followed by one entry per observation; entries for non-final steps carry
    the raw action taken.
    """
    policy = BridgePolicy(transport, config, timeout)
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
        meta={
            "name": config.name,
            "policy": policy.name,
            "seed": seed,
            "config_digest": config.digest(),
        },
    )
    trace = sim.run()
    header = {
        "type": "header",
        "version": PROTOCOL_VERSION,
        "seed": seed,
        "config_digest": config.digest(),
    }
    return trace, [header] + policy.log


def serve(
    config: ExperimentConfig,
    transport,
    *,
    timeout: Optional[float] = 60.0,
    handshake_timeout: Optional[float] = 600.0,
    max_episodes: Optional[int] = None,
) -> list[tuple[MetricsTrace, list[dict]]]:
    """Speak hello, then serve reset-delimited episodes until bye or EOF."""
    transport.send(
        {"type": "hello", "version": PROTOCOL_VERSION, "config": to_dict(config)}
    )
    episodes: list[tuple[MetricsTrace, list[dict]]] = []
    while max_episodes is None or len(episodes) < max_episodes:
        message = transport.recv(timeout=handshake_timeout)
        if message is None or message.get("type") == "bye":
            break
        if message.get("type") != "reset":
            detail = f"expected reset or bye, got {message.get('type')!r}"
            transport.send({"type": "error", "message": detail})
            raise ProtocolError(detail)
        seed = message.get("seed")
        seed = config.seeds[0] if seed is None else int(seed)
        episodes.append(serve_episode(config, transport, seed, timeout=timeout))
    else:
        transport.send({"type": "bye"})
    return episodes


def spawn_agent(
    config: ExperimentConfig,
    agent_cmd: str,
    *,
    timeout: Optional[float] = 60.0,
    handshake_timeout: Optional[float] = 600.0,
    max_episodes: Optional[int] = None,
) -> list[tuple[MetricsTrace, list[dict]]]:
    """Launch the agent command and serve it over its stdio."""
    proc = subprocess.Popen(
        shlex.split(agent_cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE
    )
    transport = FdTransport(proc.stdout.fileno(), proc.stdin.fileno(), owner=proc)
    try:
        episodes = serve(
            config,
            transport,
            timeout=timeout,
            handshake_timeout=handshake_timeout,
            max_episodes=max_episodes,
        )
    finally:
        try:
            proc.stdin.close()
        except OSError:
            pass
        proc.wait(timeout=60)
    return episodes


def serve_socket(
    config: ExperimentConfig,
    host: str,
    port: int,
    *,
    timeout: Optional[float] = 60.0,
    handshake_timeout: Optional[float] = 600.0,
    max_episodes: Optional[int] = None,
) -> list[tuple[MetricsTrace, list[dict]]]:
    """Listen on a local socket, accept one agent, and serve it."""
    import socket

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(1)
        conn, _ = listener.accept()
        with conn:
            transport = FdTransport(conn.fileno(), conn.fileno(), owner=conn)
            return serve(
                config,
                transport,
                timeout=timeout,
                handshake_timeout=handshake_timeout,
                max_episodes=max_episodes,
            )


# -- replay ------------------------------------------------------------------


def write_episode_log(path, entries: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")


def read_episode_log(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class _ReplayPolicy:
    name = "agent"

    def __init__(self, steps: list[dict], config: ExperimentConfig) -> None:
        self._steps = steps
        self._config = config
        self._cursor = 0

    def _next_entry(self, ctx: PolicyContext, final: bool) -> dict:
        if self._cursor >= len(self._steps):
            raise DivergenceError(ctx.step, "log ends before the episode does")
        entry = self._steps[self._cursor]
        self._cursor += 1
        obs = list(
            encode_observation(
                ctx.state, ctx.estimates, ctx.now, ctx.confirm_delay, ctx.fees,
                self._config.onchain_norm,
            )
        )
        reward = 0.0
        if ctx.prev_ledger is not None:
            reward = compute_reward(ctx.prev_ledger, self._config.reward_penalty)
        if entry.get("step") != ctx.step:
            raise DivergenceError(ctx.step, f"log step is {entry.get('step')}")
        if entry.get("o") != obs:
            raise DivergenceError(ctx.step, f"observation mismatch: {entry.get('o')} != {obs}")
        if entry.get("r") != reward:
            raise DivergenceError(ctx.step, f"reward mismatch: {entry.get('r')} != {reward}")
        if not final and "a" not in entry:
            raise DivergenceError(ctx.step, "log entry has no action (truncated episode?)")
        return entry

    def __call__(self, ctx: PolicyContext):
        entry = self._next_entry(ctx, final=False)
        a = entry["a"]
        return process_raw_action(RawAction(float(a[0]), float(a[1])), ctx, self._config.min_swap_fraction)

    def finish(self, ctx: PolicyContext) -> None:
        self._next_entry(ctx, final=True)
        if self._cursor != len(self._steps):
            raise DivergenceError(ctx.step, "log continues past the end of the episode")


def replay_policy(log, config: ExperimentConfig) -> MetricsTrace:
    """Re-run a recorded episode without the agent, verifying every step.

    `log` is a path to an episode log or the entry list itself. The replay
    checks the config fingerprint, then every observation, reward, and action
    in order; any mismatch raises DivergenceError at the offending step.
    """
    entries = read_episode_log(log) if not isinstance(log, list) else log
    if not entries or entries[0].get("type") != "header":
        raise DivergenceError(-1, "log has no header entry")
    header = entries[0]
    if header.get("config_digest") != config.digest():
        raise DivergenceError(-1, "log was recorded under a different configuration")
    seed = int(header["seed"])
    policy = _ReplayPolicy(entries[1:], config)
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
        meta={
            "name": config.name,
            "policy": policy.name,
            "seed": seed,
            "config_digest": config.digest(),
        },
    )
    return sim.run()
