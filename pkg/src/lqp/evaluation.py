"""Monte Carlo engine, welfare formula, and convergence diagnostics.

Per-path randomness is derived from ``(seed, path index, stream role)``, so
estimates are deterministic in ``(config, n_paths, seed)`` and independent of
the worker count.  Policy comparisons reuse the same market paths (common
random numbers) to sharpen differences.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .accounting import evolve_portfolio
from .market import (MarketPath, ModelConfig, Side, build_time_grid, path_rng,
                     simulate_arrivals, simulate_market_path)
from .policy import (boundary_paths, impact_policy, reflected_inventory,
                     strategy_from_inventory)
from .utility import certainty_equivalent, marginal_utility, utility_value

__all__ = [
    "MCEstimate",
    "ConvergenceRow",
    "ConvergenceStudy",
    "PolicyComparison",
    "mc_expected_utility",
    "compare_policies",
    "welfare_formula_ce",
    "convergence_study",
    "boundary_occupation",
    "occupation_study",
]

PolicySpec = Union[str, Callable]

WORKERS_ENV_VAR = "LQP_THREADS"


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    ci95: Tuple[float, float]

    @staticmethod
    def from_samples(samples: np.ndarray, seed: int) -> "MCEstimate":
        samples = np.asarray(samples, dtype=float)
        n = len(samples)
        mean = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return MCEstimate(mean=mean, std_error=se, n_paths=n, seed=seed,
                          ci95=(mean - 1.96 * se, mean + 1.96 * se))


def _resolve_workers(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _terminal_wealth(path: MarketPath, config: ModelConfig, policy: PolicySpec) -> float:
    if policy == "zero":
        return config.initial_cash
    if policy == "candidate":
        strat = strategy_from_inventory(reflected_inventory(path, config), path)
    elif policy == "impact":
        strat, _ = impact_policy(path, config)
    elif callable(policy):
        out = policy(path, config)
        strat = out[0] if isinstance(out, tuple) else out
    else:
        raise ValueError(f"unknown policy {policy!r}")
    ledger = evolve_portfolio(strat, path, config, record_trades=False)
    return float(ledger.liquidation_wealth[-1])


def _utility_chunk(config: ModelConfig, policies: Tuple[PolicySpec, ...],
                   n_steps: int, seed: int, start: int, stop: int) -> np.ndarray:
    """Per-path utilities for path indices [start, stop), one row per policy."""
    grid = build_time_grid(config.horizon, n_steps)
    out = np.empty((len(policies), stop - start))
    all_zero = all(p == "zero" for p in policies)
    for i in range(start, stop):
        if all_zero:
            path = None
        else:
            path = simulate_market_path(config, grid, seed, i)
        for j, pol in enumerate(policies):
            if pol == "zero":
                wealth = config.initial_cash
            else:
                wealth = _terminal_wealth(path, config, pol)
            out[j, i - start] = float(utility_value(config.utility, wealth))
    return out


def _run_paths(config, policies, n_paths, seed, n_steps, workers) -> np.ndarray:
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    workers = _resolve_workers(workers)
    policies = tuple(policies)
    if workers == 1 or n_paths < 4 * workers:
        return _utility_chunk(config, policies, n_steps, seed, 0, n_paths)
    bounds = np.linspace(0, n_paths, 4 * workers + 1).astype(int)
    jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_utility_chunk, config, policies, n_steps, seed, a, b)
                   for a, b in jobs]
        chunks = [f.result() for f in futures]
    return np.concatenate(chunks, axis=1)


def mc_expected_utility(config: ModelConfig, policy: PolicySpec, n_paths: int,
                        seed: int, n_steps: int = 2048,
                        workers: Optional[int] = None,
                        return_samples: bool = False):
    """Monte Carlo estimate of expected terminal utility under a policy.

    ``policy`` is ``"candidate"``, ``"impact"``, ``"zero"``, or a callable
    ``(path, config) -> Strategy`` (optionally ``(Strategy, stop_time)``).
    The zero policy never trades, so its estimate is exact with zero standard
    error.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if policy == "zero":
        u = float(utility_value(config.utility, config.initial_cash))
        est = MCEstimate(mean=u, std_error=0.0, n_paths=n_paths, seed=seed,
                         ci95=(u, u))
        if return_samples:
            return est, np.full(n_paths, u)
        return est
    samples = _run_paths(config, [policy], n_paths, seed, n_steps, workers)[0]
    est = MCEstimate.from_samples(samples, seed)
    if return_samples:
        return est, samples
    return est


@dataclass
class PolicyComparison:
    """Common-random-number evaluation of several policies on shared paths."""

    estimates: Dict[str, MCEstimate]
    samples: Dict[str, np.ndarray]

    def paired_std_error(self, name_a: str, name_b: str) -> float:
        """Standard error of the mean utility difference a - b."""
        diff = self.samples[name_a] - self.samples[name_b]
        n = len(diff)
        return float(np.std(diff, ddof=1) / math.sqrt(n))


def compare_policies(config: ModelConfig, policies: Dict[str, PolicySpec],
                     n_paths: int, seed: int, n_steps: int = 2048,
                     workers: Optional[int] = None) -> PolicyComparison:
    """Evaluate each policy on the same simulated market paths."""
    names = list(policies)
    mat = _run_paths(config, [policies[n] for n in names], n_paths, seed,
                     n_steps, workers)
    estimates = {n: MCEstimate.from_samples(mat[j], seed) for j, n in enumerate(names)}
    samples = {n: mat[j] for j, n in enumerate(names)}
    return PolicyComparison(estimates=estimates, samples=samples)


# -- welfare formula ----------------------------------------------------------

def _side_integral_chunk(config: ModelConfig, n_steps: int, seed: int,
                         start: int, stop: int) -> np.ndarray:
    """Per-path values of the squared-boundary welfare integral."""
    grid = build_time_grid(config.horizon, n_steps)
    lower, upper, _, _ = boundary_paths(config, grid.t)
    sig2 = np.asarray(config.volatility(grid.t), dtype=float) ** 2
    f_bought = (upper * upper * sig2)[:-1]
    f_sold = (lower * lower * sig2)[:-1]
    out = np.empty(stop - start)
    for i in range(start, stop):
        jumps_sell, jumps_buy = simulate_arrivals(
            config, grid,
            path_rng(seed, i, "arrivals_sell"),
            path_rng(seed, i, "arrivals_buy"))
        times, src = _merged_times(jumps_sell.times, jumps_buy.times)
        count = np.searchsorted(times, grid.t[:-1], side="left")
        side = np.where(count > 0, src[np.maximum(count - 1, 0)], Side.SOLD)
        integrand = np.where(side == Side.BOUGHT, f_bought, f_sold)
        out[i - start] = float(np.dot(integrand, grid.dt))
    return out


def _merged_times(t1: np.ndarray, t2: np.ndarray):
    times = np.concatenate([t1, t2])
    src = np.concatenate([
        np.full(len(t1), Side.BOUGHT, dtype=np.int8),
        np.full(len(t2), Side.SOLD, dtype=np.int8),
    ])
    order = np.argsort(times, kind="stable")
    return times[order], src[order]


def welfare_formula_ce(config: ModelConfig, n_paths: int = 4096, seed: int = 0,
                       n_steps: int = 512, workers: Optional[int] = None,
                       force_mc: bool = False) -> float:
    """Leading-order certainty equivalent of the quoting policy.

    The certainty equivalent equals the initial cash plus half the risk
    aversion times the expected business-time integral of the squared target
    boundary on the prevailing side; with impact the substituted boundaries
    enter the same expression.  Fully constant configurations bypass the
    side-state Monte Carlo with the closed form.
    """
    x0 = config.initial_cash
    ara = config.risk_aversion_at_start
    if config.all_constant and not force_mc:
        lo, up, _, _ = boundary_paths(config, np.asarray([0.0]))
        sig2 = float(config.volatility(0.0)) ** 2
        lam_sell = float(config.sell_rate(0.0))
        lam_buy = float(config.buy_rate(0.0))
        p_bought = lam_sell / (lam_sell + lam_buy)
        mean_sq = up[0] ** 2 * p_bought + lo[0] ** 2 * (1.0 - p_bought)
        return x0 + 0.5 * ara * mean_sq * sig2 * config.horizon
    workers = _resolve_workers(workers)
    if workers == 1 or n_paths < 4 * workers:
        vals = _side_integral_chunk(config, n_steps, seed, 0, n_paths)
    else:
        bounds = np.linspace(0, n_paths, 4 * workers + 1).astype(int)
        jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_side_integral_chunk, config, n_steps, seed, a, b)
                       for a, b in jobs]
            vals = np.concatenate([f.result() for f in futures])
    return x0 + 0.5 * ara * float(np.mean(vals))


# -- convergence study --------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    ce_mc: MCEstimate
    ce_formula: float
    ratio: float


@dataclass
class ConvergenceStudy:
    rows: List[ConvergenceRow]
    slope: float
    slope_defined: bool


def convergence_study(config: ModelConfig, epsilon_ladder: Sequence[float],
                      n_paths: int, seed: int, n_steps: int = 2048,
                      policy: PolicySpec = "candidate",
                      workers: Optional[int] = None) -> ConvergenceStudy:
    """Certainty equivalents down a spread ladder with a log-log slope fit.

    The ladder must be strictly decreasing with at least three rungs.  The
    ratio column rescales the certainty-equivalent gain by the leading-order
    power of the spread scale; the fitted slope estimates that power (flagged
    undefined when a rung shows no positive gain, e.g. for the zero policy).
    Each rung draws its own stream family (seed offset by the rung index), so
    rung estimates are independent; policies share paths only within a rung.
    """
    ladder = [float(e) for e in epsilon_ladder]
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("epsilon ladder must be strictly decreasing with >= 3 rungs")
    rows = []
    power = 2.0 * (1.0 - config.intensity_exponent)
    for rung, eps in enumerate(ladder):
        rung_seed = seed + 1_000_003 * rung
        cfg = config.with_spread_scale(eps)
        est = mc_expected_utility(cfg, policy, n_paths, rung_seed, n_steps, workers)
        ce = certainty_equivalent(cfg.utility, est.mean)
        se_ce = est.std_error / abs(float(marginal_utility(cfg.utility, ce)))
        ce_est = MCEstimate(mean=ce, std_error=se_ce, n_paths=est.n_paths,
                            seed=rung_seed,
                            ci95=(ce - 1.96 * se_ce, ce + 1.96 * se_ce))
        formula = welfare_formula_ce(cfg, seed=rung_seed, workers=workers)
        gain = ce - cfg.initial_cash
        rows.append(ConvergenceRow(epsilon=eps, ce_mc=ce_est, ce_formula=formula,
                                   ratio=gain / eps ** power))
    gains = np.array([r.ce_mc.mean for r in rows]) - config.initial_cash
    if np.all(gains > 0):
        slope = float(np.polyfit(np.log(ladder), np.log(gains), 1)[0])
        return ConvergenceStudy(rows=rows, slope=slope, slope_defined=True)
    return ConvergenceStudy(rows=rows, slope=float("nan"), slope_defined=False)


# -- boundary occupation (approximation diagnostic) ---------------------------

def boundary_occupation(inv, path: MarketPath, delta: float,
                        config: ModelConfig) -> Optional[float]:
    """Fraction of post-first-arrival grid time the position spends within
    ``delta`` (in units of the leading boundary scale) of the prevailing
    target boundary.  Returns ``None`` on paths without arrivals.
    """
    if not inv.jump_marks:
        return None
    k0 = inv.jump_marks[0].grid_index
    target = np.where(path.side == Side.BOUGHT, inv.upper, inv.lower)
    scale = delta * config.spread_scale ** (1.0 - config.intensity_exponent)
    inside = np.abs(inv.position[k0:] - target[k0:]) <= scale
    return float(np.mean(inside))


def _occupation_chunk(config: ModelConfig, delta: float, n_steps: int,
                      seed: int, start: int, stop: int) -> np.ndarray:
    grid = build_time_grid(config.horizon, n_steps)
    out = np.full(stop - start, np.nan)
    for i in range(start, stop):
        path = simulate_market_path(config, grid, seed, i)
        occ = boundary_occupation(reflected_inventory(path, config), path,
                                  delta, config)
        if occ is not None:
            out[i - start] = occ
    return out


@dataclass(frozen=True)
class OccupationRow:
    epsilon: float
    delta: float
    mean: float
    std_error: float
    n_paths_used: int


def occupation_study(config: ModelConfig, epsilon_ladder: Sequence[float],
                     delta: float, n_paths: int, seed: int,
                     n_steps: int = 2048,
                     workers: Optional[int] = None) -> List[OccupationRow]:
    """Mean boundary occupation per spread rung (paths without arrivals are
    dropped from the average)."""
    workers = _resolve_workers(workers)
    rows = []
    for eps in epsilon_ladder:
        cfg = config.with_spread_scale(float(eps))
        if workers == 1 or n_paths < 4 * workers:
            vals = _occupation_chunk(cfg, delta, n_steps, seed, 0, n_paths)
        else:
            bounds = np.linspace(0, n_paths, 4 * workers + 1).astype(int)
            jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_occupation_chunk, cfg, delta, n_steps,
                                       seed, a, b) for a, b in jobs]
                vals = np.concatenate([f.result() for f in futures])
        vals = vals[~np.isnan(vals)]
        n_used = len(vals)
        mean = float(np.mean(vals)) if n_used else float("nan")
        se = float(np.std(vals, ddof=1) / math.sqrt(n_used)) if n_used > 1 else 0.0
        rows.append(OccupationRow(epsilon=float(eps), delta=delta, mean=mean,
                                  std_error=se, n_paths_used=n_used))
    return rows
