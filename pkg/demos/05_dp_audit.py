"""Exhaustive dynamic-programming audit on desk-scale instances.

Discretizes the market into a handful of periods, solves the surrogate
exactly by backward induction, and compares the optimum against the forced
boundary policy.  Instances hold the expected fills per period fixed so the
surrogate approaches the continuous tradeoff as the spread shrinks.
"""

import math

import numpy as np

import lqp

print(f"{'spread':>8} {'q fill':>8} {'optimal CE':>12} {'candidate CE':>13} "
      f"{'gap/eps':>9} {'dp target':>10} {'formula':>9}")
for eps in (0.08, 0.04, 0.02, 0.01):
    dt = 0.5 * math.sqrt(eps)
    cfg = lqp.ModelConfig(spread_scale=eps, intensity_exponent=0.5,
                          horizon=6 * dt)
    target = lqp.trading_boundaries(0.0, cfg).upper
    inst = lqp.discretize_instance(cfg, n_periods=6, grid_step=target / 8,
                                   bound=2.5 * target)
    res = lqp.dp_optimal_utility(inst)
    ce_opt = lqp.certainty_equivalent(cfg.utility, res.optimal_value)
    ce_cand = lqp.certainty_equivalent(cfg.utility, res.candidate_value)
    # where does the DP send the position after a bid-side fill mid-horizon?
    g = inst.position_grid
    i0 = int(np.argmin(np.abs(g)))
    dp_target = res.policy_fill_target_buy[3, 1, i0]
    print(f"{eps:8.3f} {inst.fill_prob_sell:8.3f} {ce_opt:12.6f} "
          f"{ce_cand:13.6f} {res.gap / eps:9.4f} {dp_target:10.4f} "
          f"{target:9.4f}")

print("\ngap/eps shrinks down the ladder (the candidate is optimal at the "
      "leading order); the DP's own fill target drifts toward the formula "
      "value as the spread falls.")
