"""Certainty-equivalent gains down a spread ladder.

For the constant symmetric benchmark the theory says the gain is
2 * sell_rate * buy_rate * horizon / (risk_aversion * volatility^2)
times spread_scale^(2 (1 - intensity_exponent)), here simply 2 * spread_scale.
The Monte Carlo ratio should approach 2 from below as the spread shrinks and
the log-log slope should approach one.
"""

import lqp

config = lqp.ModelConfig(spread_scale=0.02, utility=lqp.exponential_utility(1.0))

study = lqp.convergence_study(
    config,
    epsilon_ladder=[0.04, 0.02, 0.01, 0.005],
    n_paths=20_000,             # bump to >= 1e5 for acceptance-grade bands
    seed=2024,
    n_steps=2048,
)

print(f"{'spread':>8} {'CE (mc)':>12} {'se':>10} {'CE formula':>12} {'ratio':>8}")
for row in study.rows:
    print(f"{row.epsilon:8.3f} {row.ce_mc.mean:12.6f} {row.ce_mc.std_error:10.6f} "
          f"{row.ce_formula:12.6f} {row.ratio:8.4f}")
print(f"\nfitted log-log slope: {study.slope:.4f} "
      f"(leading order: {2 * (1 - config.intensity_exponent):.1f})")
print("ratio column approaches 2.0; the shortfall is the o(eps) remainder "
      "(idle spell before the first fill, terminal liquidation, spread paid "
      "on reflection orders).")
