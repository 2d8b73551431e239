"""Why even perfectly symmetric demand needs rebalancing.

Two channels of 40 split evenly, alternating payments of 20 from each end,
and a deliberately extreme 50% relay fee: the fee withheld at each hop
starves the forwarding balances within two payments.
"""

from relaysim.experiments import run_depletion_scenario
from relaysim.model import Direction

report = run_depletion_scenario(relay_prop=0.5, transactions=12)

print("payment log (amount 20 each, alternating directions):")
for index, (when, direction, amount, ok) in enumerate(report.transactions, start=1):
    arrow = "L->R" if direction is Direction.L_TO_R else "R->L"
    verdict = "relayed" if ok else "dropped (insufficient balance)"
    print(f"  #{index:<2} t={when:>5.1f}  {arrow}  {verdict}")

print(f"\n{report.successes} payments made it through; "
      f"everything after #{report.stuck_after} is permanently stuck.")

free = run_depletion_scenario(relay_prop=0.0, transactions=10_000)
print(f"at a zero fee the same traffic never sticks: {free.successes}/10000 relayed.")
