"""Deterministic (mean-action) rollouts from a trained checkpoint.

The simulator side writes the trace CSVs; this client only drives the
episodes and reports per-episode returns on stderr.
"""

from __future__ import annotations

import argparse

from .protocol import ProtocolError, ServerConnection
from .sac import SacAgent
from .train import log, make_connection


def run_evaluation(conn: ServerConnection, agent: SacAgent, env_seeds: list[int | None]) -> list[float]:
    conn.expect("hello")
    returns: list[float] = []
    for seed in env_seeds:
        conn.send({"type": "reset", "seed": seed})
        total = 0.0
        while True:
            message = conn.expect("obs")
            total += message["r"]
            if message["done"]:
                break
            action = agent.act(message["o"], deterministic=True)
            conn.send({"type": "act", "a": [float(action[0]), float(action[1])]})
        returns.append(total)
        log(f"evaluation seed {seed}: return {total:.2f}")
    conn.send({"type": "bye"})
    return returns


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--env-seeds", default="", help="comma list; empty = one episode, config seed")
    parser.add_argument("--connect", default=None, help="host:port; default is stdio")
    args = parser.parse_args(argv)

    agent = SacAgent.load(args.checkpoint)
    seeds: list[int | None]
    if args.env_seeds.strip():
        seeds = [int(part) for part in args.env_seeds.split(",") if part.strip()]
    else:
        seeds = [None]

    conn = make_connection(args.connect)
    try:
        run_evaluation(conn, agent, seeds)
    except ProtocolError as exc:
        log(f"protocol failure: {exc}")
        return 1
    finally:
        conn.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
