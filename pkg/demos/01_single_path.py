"""Walk one simulated trading day end to end.

Simulates the market (mid price, spread, incoming order flow), runs the
boundary-quoting policy with its reflected inventory, settles everything
through the self-financing ledger, and prints the trade log alongside the
shadow-price check.
"""

import numpy as np

import lqp

config = lqp.ModelConfig(
    volatility=1.0,
    spread_factor=1.0,
    sell_rate=1.0,
    buy_rate=1.0,
    spread_scale=0.02,          # relative half-spread = 2%
    intensity_exponent=0.5,     # order flow speeds up as the spread tightens
    horizon=1.0,
    initial_price=100.0,
    initial_cash=0.0,
    utility=lqp.exponential_utility(1.0),
)
lqp.validate_config(config)

grid = lqp.build_time_grid(config.horizon, 2048)
path = lqp.simulate_market_path(config, grid, seed=7, path_index=0)

print(f"arrivals: {len(path.arrivals)} "
      f"(sell orders: {len(path.jumps_sell)}, buy orders: {len(path.jumps_buy)})")

b = lqp.trading_boundaries(0.0, config)
print(f"monetary targets: [{b.lower:+.4f}, {b.upper:+.4f}]")

inventory = lqp.reflected_inventory(path, config)
strategy = lqp.strategy_from_inventory(inventory, path)
ledger = lqp.evolve_portfolio(strategy, path, config)

print(f"\nfirst ten trades of {len(ledger.trades)}:")
print(f"{'time':>8} {'kind':>16} {'units':>10} {'price':>10} {'cash':>10}")
for trade in ledger.trades[:10]:
    print(f"{trade.time:8.4f} {trade.kind:>16} {trade.units:10.6f} "
          f"{trade.price:10.4f} {trade.cash_after:10.4f}")

wealth = ledger.liquidation_wealth[-1]
print(f"\nterminal liquidation wealth: {wealth:+.6f}")
print(f"max |monetary position|:     {lqp.max_risky_exposure(ledger, path):.6f} "
      f"(boundary scale {max(b.upper, -b.lower):.6f})")

# the shadow price lives inside the spread and matches every execution
sh = lqp.shadow_price_path(path, config)
inside = np.all(((1 - path.half_spread) * path.mid <= sh.price + 1e-12 * path.mid)
                & (sh.price <= (1 + path.half_spread) * path.mid + 1e-12 * path.mid))
xt = lqp.shadow_terminal_wealth(strategy, ledger, path, config)
print(f"shadow price inside the spread: {inside}")
print(f"shadow-market wealth of the same orders: {xt:+.6f} "
      f"(gap {wealth - xt:+.2e})")
