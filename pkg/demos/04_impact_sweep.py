"""Price impact: how permanent quote impact shrinks liquidity provision.

With symmetric order flow the target positions scale by (1 - kappa) and the
certainty equivalent by (1 - kappa)^2.  The impact variant trades with limit
orders only and liquidates if the position escapes twice the target band; the
escape probability fades as the spread shrinks.
"""

import dataclasses

import lqp

base = lqp.ModelConfig(spread_scale=0.01)

print(f"{'kappa':>6} {'upper':>10} {'lower':>10} {'CE formula':>12} "
      f"{'CE mc':>10} {'se':>9} {'stop prob':>10}")
for kappa in (0.0, 0.25, 0.5, 0.75):
    cfg = dataclasses.replace(base, impact_fraction=kappa)
    b = lqp.trading_boundaries(0.0, cfg)
    formula = lqp.welfare_formula_ce(cfg)
    policy = "impact" if kappa > 0 else "candidate"
    est = lqp.mc_expected_utility(cfg, policy, n_paths=4000, seed=5,
                                  n_steps=1024)
    ce = lqp.certainty_equivalent(cfg.utility, est.mean)
    se = est.std_error / abs(float(lqp.marginal_utility(cfg.utility, ce)))
    if kappa > 0:
        grid = lqp.build_time_grid(cfg.horizon, 1024)
        stops = 0
        for i in range(2000):
            path = lqp.simulate_market_path(cfg, grid, 5, i)
            _, stop = lqp.impact_policy(path, cfg)
            stops += stop is not None
        stop_prob = stops / 2000
    else:
        stop_prob = 0.0
    print(f"{kappa:6.2f} {b.upper:10.5f} {b.lower:10.5f} {formula:12.6f} "
          f"{ce:10.6f} {se:9.6f} {stop_prob:10.4f}")

print("\nupper/lower scale exactly by (1 - kappa); the monte carlo CE sits "
      "below the leading-order formula at this spread mostly because of the "
      "premature-liquidation drag.")
