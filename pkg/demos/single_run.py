"""One seeded run, start to finish: balances, fees, and swap activity.

Loads the desk-scale skewed-demand configuration, runs the threshold policy,
and prints a sampled view of the per-step trace.
"""

from pathlib import Path

from relaysim import load_config
from relaysim.experiments import run_single

config = load_config(Path(__file__).resolve().parent.parent / "configs" / "skewed_high.yaml")
trace = run_single(config, seed=0)

print(f"config: {config.name}   policy: {trace.meta['policy']}   seed: {trace.meta['seed']}")
print(f"{len(trace.rows)} control steps over {trace.rows[-1].time:.0f} simulated minutes\n")

header = f"{'time':>6} {'local L':>9} {'local R':>9} {'on-chain':>9} {'fortune':>10} {'swaps this step'}"
print(header)
print("-" * len(header))
stride = max(1, len(trace.rows) // 12)
for row in trace.rows[::stride] + [trace.rows[-1]]:
    print(
        f"{row.time:>6.0f} {row.local_left:>9.1f} {row.local_right:>9.1f} "
        f"{row.onchain:>9.1f} {row.fortune:>10.2f} {row.swaps}"
    )

last = trace.rows[-1]
print("\ntotals:")
print(f"  relay fees earned   {last.cum_relay_fees:>9.2f}")
print(f"  relay fees lost     {last.cum_lost_fees:>9.2f}  (dropped payments)")
print(f"  swap fees paid      {last.cum_swap_fees:>9.2f}  over {last.cum_failed_swaps} failed swaps")
print(f"  fortune change      {last.fortune - trace.rows[0].fortune:>9.2f}")
