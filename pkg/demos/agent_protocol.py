"""The agent wire protocol, shown end to end without leaving the process.

A scripted agent answers every observation with the zero action; the
resulting run is provably identical to never rebalancing. The first protocol
exchanges are printed so the message shapes are easy to see.
"""

import json
from pathlib import Path

from relaysim import load_config
from relaysim.bridge import CallbackTransport, serve
from relaysim.experiments import run_single


def zero_agent(message):
    if message["type"] == "hello":
        return [{"type": "reset", "seed": 11}]
    if message["type"] == "obs" and not message["done"]:
        return [{"type": "act", "a": [0.0, 0.0]}]
    if message["type"] == "obs":
        return [{"type": "bye"}]
    return []


config = load_config(Path(__file__).resolve().parent.parent / "configs" / "skewed_high.yaml")
config.arrivals[list(config.arrivals)[0]].count = 400
config.arrivals[list(config.arrivals)[1]].count = 100

transport = CallbackTransport(zero_agent)
(trace, log), = serve(config, transport)

print("first exchanges on the wire:")
for direction, message in transport.transcript[:6]:
    arrow = "server ->" if direction == "send" else "agent  ->"
    line = json.dumps(message)
    print(f"  {arrow} {line[:110]}{'...' if len(line) > 110 else ''}")

print(f"\nepisode: {len(trace.rows) - 1} decisions, final fortune {trace.final_fortune:.2f}")

baseline = run_single(config, seed=11, policy_override="none")
identical = trace.to_csv_text() == baseline.to_csv_text()
print(f"zero-action episode equals the no-rebalancing run byte for byte: {identical}")
