"""Walk through the fee arithmetic that drives every rebalancing decision.

Prints the relay fee line, the swap cost curve, the gross/net round trip,
and the break-even swap sizes for a few relay fee levels.
"""

from relaysim import FeeSchedule, gross_from_net, net_from_gross, relay_fee, swap_fee
from relaysim.experiments import profitability_thresholds

fees = FeeSchedule(relay_base=0.0, relay_prop=0.01, swap_rate=0.005, swap_flat=2.0)

print("Relay fees at 1% proportional:")
for amount in (5, 25, 100, 400):
    print(f"  forwarding {amount:>4} earns the node {relay_fee(amount, fees):.2f}")

print("\nSwap costs (0.5% + 2 flat), net amount -> gross cost:")
for net in (10, 100, 400, 993.03):
    print(f"  moving {net:>7.2f} between layers costs {swap_fee(net, fees):.4f} "
          f"(gross {gross_from_net(net, fees):.2f})")

print("\nThe inverse direction: what a gross budget can actually move:")
for gross in (1.5, 2.0, 102.5, 1000.0):
    net, below = net_from_gross(gross, fees)
    note = "  <- below the flat fee, nothing moves" if below else ""
    print(f"  gross {gross:>7.2f} funds a net movement of {net:.4f}{note}")

print("\nBreak-even swap sizes (necessary, not sufficient, for profit):")
for relay_prop in (0.00003, 0.003, 0.005, 0.0075, 0.01, 0.02):
    t = profitability_thresholds(FeeSchedule(0.0, relay_prop, 0.005, 2.0))
    fmt = lambda x: "infeasible" if x is None else f"{x:.2f}"
    print(f"  relay fee {relay_prop:<8}: swap-in > {fmt(t.swap_in):<12} swap-out > {fmt(t.swap_out)}")

print("\nBelow a 0.5% relay fee no swap size can pay for itself, which is why")
print("a node facing today's typical fees is better off never rebalancing.")
