import numpy as np
import pytest
from scipy import stats

from lqp import (ConfigError, JumpTimes, ModelConfig, Side, apply_impact_jumps,
                 build_time_grid, compute_side_state, path_rng,
                 simulate_arrivals, simulate_market_path, simulate_mid_price,
                 validate_config)
from lqp.coefficients import PiecewiseConstant, UShape


# -- time grid -----------------------------------------------------------------

def test_build_time_grid_uniform():
    grid = build_time_grid(1.0, 4)
    np.testing.assert_allclose(grid.t, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.n_steps == 4


def test_build_time_grid_single_step():
    grid = build_time_grid(2.0, 1)
    np.testing.assert_allclose(grid.t, [0.0, 2.0])


def test_build_time_grid_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_time_grid(1.0, 0)
    with pytest.raises(ValueError):
        build_time_grid(-1.0, 4)


# -- config validation -----------------------------------------------------------

def test_config_rejects_bad_scalars():
    with pytest.raises(ConfigError):
        ModelConfig(intensity_exponent=1.2)
    with pytest.raises(ConfigError):
        ModelConfig(impact_fraction=1.0)
    with pytest.raises(ConfigError):
        ModelConfig(spread_scale=0.0)


def test_validate_config_flags_vanishing_coefficient():
    cfg = ModelConfig(volatility=PiecewiseConstant((0.0, 0.5), (1.0, 0.0)))
    with pytest.raises(ConfigError, match="volatility"):
        validate_config(cfg)


def test_validate_config_flags_wide_spread():
    cfg = ModelConfig(spread_scale=0.5, spread_factor=2.5)
    with pytest.raises(ConfigError, match="spread"):
        validate_config(cfg)


# -- mid price -------------------------------------------------------------------

def test_zero_volatility_mid_is_flat(small_grid):
    # constructor allows it; only validate_config enforces Assumption-1 bounds
    cfg = ModelConfig(volatility=0.0, initial_price=50.0)
    mid, _ = simulate_mid_price(cfg, small_grid, path_rng(0, 0, "brownian"))
    np.testing.assert_allclose(mid, 50.0)


def test_mid_price_martingale_mc():
    # sample mean of S_T over 1e5 paths within 3 standard errors of s0
    cfg = ModelConfig(volatility=1.0, initial_price=1.0, horizon=1.0)
    grid = build_time_grid(1.0, 8)
    terminal = np.empty(100_000)
    for i in range(len(terminal)):
        mid, _ = simulate_mid_price(cfg, grid, path_rng(42, i, "brownian"))
        terminal[i] = mid[-1]
    se = terminal.std(ddof=1) / np.sqrt(len(terminal))
    assert abs(terminal.mean() - 1.0) < 3 * se


def test_log_mid_variance_matches_lognormal():
    cfg = ModelConfig(volatility=1.0, initial_price=1.0, horizon=1.0)
    grid = build_time_grid(1.0, 8)
    logs = np.empty(100_000)
    for i in range(len(logs)):
        mid, _ = simulate_mid_price(cfg, grid, path_rng(7, i, "brownian"))
        logs[i] = np.log(mid[-1])
    var = logs.var(ddof=1)
    se = np.sqrt(2.0 / (len(logs) - 1))  # variance-of-variance for gaussians
    assert abs(var - 1.0) < 3 * se


def test_martingale_holds_for_time_varying_volatility():
    for vol in (UShape(0.5, 1.0, 1.0), PiecewiseConstant((0.0, 0.4), (0.6, 1.4))):
        cfg = ModelConfig(volatility=vol, initial_price=2.0)
        grid = build_time_grid(1.0, 64)
        terminal = np.empty(20_000)
        for i in range(len(terminal)):
            mid, _ = simulate_mid_price(cfg, grid, path_rng(5, i, "brownian"))
            terminal[i] = mid[-1]
        se = terminal.std(ddof=1) / np.sqrt(len(terminal))
        assert abs(terminal.mean() - 2.0) < 3 * se


def test_grid_refinement_consistency_constant_vol():
    # same Brownian increments aggregated -> identical terminal value
    cfg = ModelConfig(volatility=1.3, initial_price=10.0)
    fine = build_time_grid(1.0, 512)
    mid_fine, dW = simulate_mid_price(cfg, fine, path_rng(3, 0, "brownian"))
    coarse = build_time_grid(1.0, 256)
    dW_coarse = dW.reshape(-1, 2).sum(axis=1)
    sig = 1.3
    log_inc = sig * dW_coarse - 0.5 * sig * sig * coarse.dt
    mid_coarse_T = 10.0 * np.exp(np.sum(log_inc))
    assert mid_coarse_T == pytest.approx(mid_fine[-1], rel=1e-13)


# -- arrivals --------------------------------------------------------------------

def test_zero_intensity_stream_is_empty(small_grid):
    cfg = ModelConfig(sell_rate=0.0, buy_rate=1.0)
    j1, j2 = simulate_arrivals(cfg, small_grid, path_rng(0, 0, "arrivals_sell"),
                               path_rng(0, 0, "arrivals_buy"))
    assert len(j1) == 0
    assert len(j2) > 0


def test_arrival_count_matches_poisson_mean_and_variance():
    # lambda = 1, eps = 0.01, theta = 0.5 -> Poisson(10) over [0, 1]
    cfg = ModelConfig(sell_rate=1.0, buy_rate=1.0, spread_scale=0.01,
                      intensity_exponent=0.5)
    grid = build_time_grid(1.0, 16)
    counts = np.empty(10_000)
    for i in range(len(counts)):
        j1, _ = simulate_arrivals(cfg, grid, path_rng(9, i, "arrivals_sell"),
                                  path_rng(9, i, "arrivals_buy"))
        counts[i] = len(j1)
    se_mean = counts.std(ddof=1) / np.sqrt(len(counts))
    assert abs(counts.mean() - 10.0) < 3 * se_mean
    # variance of the sample variance of Poisson ~ (mu + 2 mu^2) / n
    se_var = np.sqrt((10.0 + 2.0 * 100.0) / len(counts))
    assert abs(counts.var(ddof=1) - 10.0) < 3 * se_var


def test_interarrival_times_are_exponential():
    # keep only gaps opening in the first half of a window 10 means long, so
    # the right-censoring mass (~e^-10) is far below KS resolution
    cfg = ModelConfig(sell_rate=1.0, buy_rate=1.0, spread_scale=0.0025,
                      intensity_exponent=0.5, horizon=1.0)
    grid = build_time_grid(1.0, 16)
    rate = 1.0 * 0.0025 ** -0.5
    gaps = []
    for i in range(300):
        j1, _ = simulate_arrivals(cfg, grid, path_rng(13, i, "arrivals_sell"),
                                  path_rng(13, i, "arrivals_buy"))
        if len(j1) > 1:
            starts = j1.times[:-1]
            d = np.diff(j1.times)
            gaps.extend(d[starts < 0.5])
    stat = stats.kstest(gaps, "expon", args=(0, 1.0 / rate))
    assert stat.pvalue > 0.01


def test_streams_are_disjoint(symmetric_config, small_grid):
    for i in range(50):
        j1, j2 = simulate_arrivals(symmetric_config, small_grid,
                                   path_rng(1, i, "arrivals_sell"),
                                   path_rng(1, i, "arrivals_buy"))
        assert np.intersect1d(j1.times, j2.times).size == 0


def test_thinning_respects_time_varying_rate():
    # rate doubles in the second half; counts should track the integral
    cfg = ModelConfig(sell_rate=PiecewiseConstant((0.0, 0.5), (1.0, 2.0)),
                      buy_rate=1.0, spread_scale=0.04, intensity_exponent=0.5)
    grid = build_time_grid(1.0, 16)
    first = second = 0
    n = 4000
    for i in range(n):
        j1, _ = simulate_arrivals(cfg, grid, path_rng(17, i, "arrivals_sell"),
                                  path_rng(17, i, "arrivals_buy"))
        first += np.sum(j1.times < 0.5)
        second += np.sum(j1.times >= 0.5)
    scale = 0.04 ** -0.5
    assert first / n == pytest.approx(0.5 * scale, rel=0.05)
    assert second / n == pytest.approx(1.0 * scale, rel=0.05)


# -- side state ------------------------------------------------------------------

def test_side_state_defaults_to_sold(small_grid):
    empty = JumpTimes(np.empty(0), np.empty(0, dtype=np.int64))
    side = compute_side_state(empty, empty, small_grid)
    assert np.all(side == Side.SOLD)


def test_side_state_single_arrival(small_grid):
    j1 = JumpTimes.from_times(np.array([0.3]), small_grid)
    empty = JumpTimes(np.empty(0), np.empty(0, dtype=np.int64))
    side = compute_side_state(j1, empty, small_grid)
    assert np.all(side[small_grid.t <= 0.3] == Side.SOLD)
    assert np.all(side[small_grid.t > 0.3] == Side.BOUGHT)


def test_side_state_long_run_fraction(symmetric_config):
    # equal rates -> half the time in each side; sample past the initial
    # all-sold transient (first-arrival mass before t=0.5 is ~1 - e^-14)
    cfg = symmetric_config.with_spread_scale(0.005)
    grid = build_time_grid(1.0, 128)
    frac = []
    for i in range(2000):
        path = simulate_market_path(cfg, grid, 23, i)
        frac.append(np.mean(path.side[grid.t >= 0.5] == Side.BOUGHT))
    frac = np.asarray(frac)
    se = frac.std(ddof=1) / np.sqrt(len(frac))
    assert abs(frac.mean() - 0.5) < 3 * se


def test_side_state_deterministic_replay(symmetric_config, small_grid):
    for i in range(20):
        path = simulate_market_path(symmetric_config, small_grid, 31, i)
        again = compute_side_state(path.jumps_sell, path.jumps_buy, small_grid)
        np.testing.assert_array_equal(path.side, again)


def test_side_state_recoverable_from_trade_log(symmetric_config, small_grid):
    # the quoting policy fills every arrival, so the executed-quote log pins
    # down both jump streams and hence the side state
    import lqp
    for i in range(10):
        path = simulate_market_path(symmetric_config, small_grid, 37, i)
        strat = lqp.strategy_from_inventory(
            lqp.reflected_inventory(path, symmetric_config), path)
        ledger = lqp.evolve_portfolio(strat, path, symmetric_config)
        buys = np.array([t.time for t in ledger.trades
                         if t.kind == "limit_buy_fill"])
        sells = np.array([t.time for t in ledger.trades
                          if t.kind == "limit_sell_fill"])
        j_sell = JumpTimes.from_times(buys, small_grid)
        j_buy = JumpTimes.from_times(sells, small_grid)
        np.testing.assert_array_equal(
            path.side, compute_side_state(j_sell, j_buy, small_grid))


# -- impact jumps ----------------------------------------------------------------

def test_impact_identity_for_zero_kappa(symmetric_config, small_grid):
    path = simulate_market_path(symmetric_config, small_grid, 41, 0)
    out = apply_impact_jumps(path.mid, path.jumps_sell, path.jumps_buy,
                             path.half_spread, 0.0)
    np.testing.assert_array_equal(out, path.mid)


def test_impact_single_buy_arrival_moves_mid_up():
    grid = build_time_grid(1.0, 10)
    mid = np.full(11, 100.0)
    eps = np.full(11, 0.01)
    empty = JumpTimes(np.empty(0), np.empty(0, dtype=np.int64))
    jbuy = JumpTimes.from_times(np.array([0.55]), grid)
    out = apply_impact_jumps(mid, empty, jbuy, eps, 0.5)
    k = jbuy.grid_idx[0]
    assert np.all(out[:k] == 100.0)
    np.testing.assert_allclose(out[k:], 100.5)


def test_impact_alternating_jumps_compound_below_one():
    grid = build_time_grid(1.0, 10)
    mid = np.full(11, 1.0)
    eps = np.full(11, 0.02)
    jsell = JumpTimes.from_times(np.array([0.25]), grid)
    jbuy = JumpTimes.from_times(np.array([0.65]), grid)
    out = apply_impact_jumps(mid, jsell, jbuy, eps, 0.5)
    assert out[-1] == pytest.approx((1 - 0.01) * (1 + 0.01))
    assert out[-1] < 1.0


def test_arrival_table_prices_with_impact(symmetric_config):
    import dataclasses
    cfg = dataclasses.replace(symmetric_config, impact_fraction=0.5)
    grid = build_time_grid(1.0, 512)
    path = simulate_market_path(cfg, grid, 5, 3)
    arr = path.arrivals
    for j in range(len(arr)):
        k = arr.grid_idx[j]
        factor = 1.0 - 0.5 * arr.half_spread[j] if arr.side[j] == Side.BOUGHT \
            else 1.0 + 0.5 * arr.half_spread[j]
        assert arr.mid_after[j] == pytest.approx(arr.mid_before[j] * factor, rel=1e-12)
    # grid mid at a snapped point equals the last arrival's post-jump price
    last_by_idx = {}
    for j in range(len(arr)):
        last_by_idx[int(arr.grid_idx[j])] = j
    for k, j in last_by_idx.items():
        assert path.mid[k] == pytest.approx(arr.mid_after[j], rel=1e-12)


# -- reproducibility -------------------------------------------------------------

def test_paths_reproducible_and_stream_independent(symmetric_config, small_grid):
    a = simulate_market_path(symmetric_config, small_grid, 99, 7)
    b = simulate_market_path(symmetric_config, small_grid, 99, 7)
    np.testing.assert_array_equal(a.mid, b.mid)
    np.testing.assert_array_equal(a.jumps_sell.times, b.jumps_sell.times)
    c = simulate_market_path(symmetric_config, small_grid, 99, 8)
    assert not np.array_equal(a.mid, c.mid)
