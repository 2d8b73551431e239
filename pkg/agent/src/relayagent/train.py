"""Online training against the simulator: one gradient step per control epoch.

Per epoch the incoming observation closes the previous transition
(state, rawAction, reward, nextState), a gradient step runs on the replay
memory, and the next raw action is sampled and sent. The first few epochs
act uniformly at random to seed the buffer. All diagnostics go to stderr;
stdout belongs to the protocol when running over stdio.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field

from .config import SacConfig, profile
from .protocol import ProtocolError, ServerConnection
from .sac import SacAgent


def log(message: str) -> None:
    print(f"[relayagent] {message}", file=sys.stderr, flush=True)


@dataclass
class CurvePoint:
    episode: int
    step: int
    reward: float
    fortune: float
    lost_fees: float
    failed_swaps: int


@dataclass
class TrainResult:
    agent: SacAgent
    curve: list[CurvePoint] = field(default_factory=list)

    @property
    def episode_returns(self) -> dict[int, float]:
        totals: dict[int, float] = {}
        for point in self.curve:
            totals[point.episode] = totals.get(point.episode, 0.0) + point.reward
        return totals


def write_curve(path, curve: list[CurvePoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "step", "reward", "fortune", "lost_fees", "failed_swaps"])
        for point in curve:
            writer.writerow(
                [point.episode, point.step, repr(point.reward), repr(point.fortune),
                 repr(point.lost_fees), point.failed_swaps]
            )


def run_training(
    conn: ServerConnection,
    config: SacConfig,
    *,
    agent_seed: int = 0,
    episodes: int = 1,
    env_seed: int | None = None,
    out_dir: str | None = None,
    resume: str | None = None,
    checkpoint_every: int | None = None,
    deterministic: bool = False,
    zero_actions: bool = False,
) -> TrainResult:
    hello = conn.expect("hello")
    env_penalty = hello["config"].get("reward_penalty", 0.0)
    if env_penalty != config.penalty:
        log(
            f"warning: environment charges {env_penalty} per failed swap but the "
            f"profile expects {config.penalty}"
        )

    if resume:
        agent = SacAgent.load(resume, config)
        log(f"resumed from {resume} ({len(agent.buffer)} transitions, "
            f"{agent.updates_done} updates)")
    else:
        agent = SacAgent(config, seed=agent_seed)

    result = TrainResult(agent=agent)
    checkpoint_path = os.path.join(out_dir, "checkpoint.pt") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    for episode in range(episodes):
        conn.send({"type": "reset", "seed": env_seed})
        previous: tuple[list, object] | None = None
        while True:
            message = conn.expect("obs")
            obs, reward = message["o"], message["r"]
            info = message.get("info", {})
            if previous is not None:
                agent.observe(previous[0], previous[1], reward, obs)
                result.curve.append(
                    CurvePoint(
                        episode=episode,
                        step=message["step"],
                        reward=reward,
                        fortune=info.get("fortune", 0.0),
                        lost_fees=info.get("lost_fees", 0.0),
                        failed_swaps=info.get("failed_swaps", 0),
                    )
                )
            if message["done"]:
                break
            if not (deterministic or zero_actions):
                for _ in range(config.gradient_steps):
                    agent.update()
            if zero_actions:
                action = [0.0, 0.0]
            elif deterministic:
                action = agent.act(obs, deterministic=True)
            elif agent.epochs_acted < config.initial_random_steps:
                action = agent.random_action()
            else:
                action = agent.act(obs)
            conn.send({"type": "act", "a": [float(action[0]), float(action[1])]})
            previous = (obs, action)
            agent.epochs_acted += 1
            if checkpoint_path and checkpoint_every and agent.epochs_acted % checkpoint_every == 0:
                agent.save(checkpoint_path)
        log(f"episode {episode} finished: return "
            f"{result.episode_returns.get(episode, 0.0):.2f}")

    conn.send({"type": "bye"})
    if out_dir:
        agent.save(os.path.join(out_dir, "checkpoint.pt"))
        write_curve(os.path.join(out_dir, "learning_curve.csv"), result.curve)
        log(f"wrote checkpoint and learning curve to {out_dir}")
    return result


def make_connection(connect: str | None) -> ServerConnection:
    if connect is None:
        return ServerConnection.stdio()
    host, port = connect.rsplit(":", 1)
    return ServerConnection.connect(host or "127.0.0.1", int(port))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profile", default="skewed", help="skewed or even")
    parser.add_argument("--agent-seed", type=int, default=0)
    parser.add_argument("--env-seed", type=int, default=None, help="seed sent with reset")
    parser.add_argument("--episodes", type=int, default=1)
    parser.add_argument("--out", default=None, help="directory for checkpoint + curve")
    parser.add_argument("--resume", default=None, help="checkpoint to continue from")
    parser.add_argument("--checkpoint-every", type=int, default=None, help="epochs between saves")
    parser.add_argument("--connect", default=None, help="host:port; default is stdio")
    parser.add_argument("--reward-scale", type=float, default=None)
    parser.add_argument("--zero-actions", action="store_true",
                        help="always send (0, 0); baseline/diagnostic mode")
    args = parser.parse_args(argv)

    config = profile(args.profile)
    if args.reward_scale is not None:
        from dataclasses import replace

        config = replace(config, reward_scale=args.reward_scale)

    conn = make_connection(args.connect)
    try:
        run_training(
            conn,
            config,
            agent_seed=args.agent_seed,
            episodes=args.episodes,
            env_seed=args.env_seed,
            out_dir=args.out,
            resume=args.resume,
            checkpoint_every=args.checkpoint_every,
            zero_actions=args.zero_actions,
        )
    except ProtocolError as exc:
        log(f"protocol failure: {exc}")
        return 1
    finally:
        conn.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
