"""Liquidity provision in a limit order market: simulation, the small-spread
quoting policy with reflected inventory, a frictionless shadow-market check,
welfare asymptotics, and an exhaustive dynamic-programming audit."""

from .coefficients import (Constant, PiecewiseConstant, UShape, as_coefficient,
                           coefficient_from_spec)
from .market import (ArrivalTable, ConfigError, JumpTimes, MarketPath,
                     ModelConfig, Side, TimeGrid, apply_impact_jumps,
                     build_time_grid, compute_side_state, path_rng,
                     simulate_arrivals, simulate_market_path,
                     simulate_mid_price, validate_config)
from .policy import (Boundaries, BoundaryScaledPolicy, InventoryPath, JumpMark,
                     LimitFill, Strategy, boundary_paths, candidate_strategy,
                     impact_policy, reflected_inventory, strategy_from_inventory,
                     trading_boundaries)
from .accounting import (PortfolioLedger, Trade, evolve_portfolio,
                         liquidation_wealth, max_risky_exposure)
from .shadow import (ShadowPath, feedback_policy, frictionless_wealth,
                     shadow_price_path, shadow_terminal_wealth)
from .utility import (UtilityError, UtilitySpec, absolute_risk_aversion,
                      certainty_equivalent, custom_utility, exponential_utility,
                      marginal_utility, utility_value)
from .evaluation import (ConvergenceRow, ConvergenceStudy, MCEstimate,
                         OccupationRow, PolicyComparison, boundary_occupation,
                         compare_policies, convergence_study,
                         mc_expected_utility, occupation_study,
                         welfare_formula_ce)
from .oracle import (DiscreteInstance, DPResult, ResourceError,
                     candidate_targets, discretize_instance, dp_optimal_utility,
                     enumerate_one_period, instance_from_json, instance_to_json,
                     refinement_value_bound, result_to_json)

__version__ = "0.1.0"
