"""Zero-action agent: answers every observation with (0, 0).

Useful as a protocol smoke test and as the do-nothing baseline; a run driven
by this agent must match the simulator's built-in `none` policy exactly.
"""

from .protocol import ServerConnection


def main() -> int:
    conn = ServerConnection.stdio()
    conn.expect("hello")
    conn.send({"type": "reset", "seed": None})
    while True:
        message = conn.expect("obs")
        if message["done"]:
            break
        conn.send({"type": "act", "a": [0.0, 0.0]})
    conn.send({"type": "bye"})
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
