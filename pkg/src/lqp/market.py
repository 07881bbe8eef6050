"""Exogenous market simulation: mid price, spread, order arrivals, side state.

Everything here is a pure transform of value inputs.  Randomness enters only
through counter-based per-path generators derived from
``(master seed, path index, stream role)``, so results never depend on
scheduling or worker count.

Grid conventions used throughout the package:

* coefficient functions are frozen at the left endpoint of each step;
* the mid price uses the exact log scheme, so the diffusive part has no
  discretisation bias for constant volatility;
* order arrivals live in continuous time (drawn by thinning) and are snapped
  to the right endpoint of the grid interval containing them for all state
  updates; the continuous timestamp is retained.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Tuple

import numpy as np

from .coefficients import as_coefficient, is_constant, sup_on
from .utility import UtilitySpec, absolute_risk_aversion, exponential_utility

__all__ = [
    "ConfigError",
    "Side",
    "ModelConfig",
    "TimeGrid",
    "JumpTimes",
    "ArrivalTable",
    "MarketPath",
    "path_rng",
    "build_time_grid",
    "simulate_mid_price",
    "simulate_arrivals",
    "compute_side_state",
    "apply_impact_jumps",
    "simulate_market_path",
    "validate_config",
]


class ConfigError(ValueError):
    """A model parameter violates its admissible range."""


class Side(IntEnum):
    """Provider's most recent fill direction: BOUGHT after an incoming sell
    order executes our bid quote, SOLD after an incoming buy order executes
    our ask quote.  Before the first arrival every time point counts as SOLD."""

    BOUGHT = 1
    SOLD = 2


_STREAM_ROLES = {"brownian": 0, "arrivals_sell": 1, "arrivals_buy": 2}


def path_rng(seed: int, path_index: int, role: str) -> np.random.Generator:
    """Counter-based generator for one (path, role) stream."""
    key = np.random.SeedSequence([int(seed), int(path_index), _STREAM_ROLES[role]])
    return np.random.Generator(np.random.Philox(key))


@dataclass
class ModelConfig:
    """Market and preference parameters.

    ``sell_rate`` and ``buy_rate`` are the arrival-rate functions of other
    participants' market sell and buy orders before spread scaling; the
    effective intensities are ``rate(t) * spread_scale**(-intensity_exponent)``.
    The relative half-spread is ``spread_scale * spread_factor(t)``.
    """

    volatility: object = 1.0
    spread_factor: object = 1.0
    sell_rate: object = 1.0
    buy_rate: object = 1.0
    spread_scale: float = 0.01
    intensity_exponent: float = 0.5
    impact_fraction: float = 0.0
    horizon: float = 1.0
    initial_price: float = 100.0
    initial_cash: float = 0.0
    utility: UtilitySpec = field(default_factory=lambda: exponential_utility(1.0))

    def __post_init__(self):
        self.volatility = as_coefficient(self.volatility)
        self.spread_factor = as_coefficient(self.spread_factor)
        self.sell_rate = as_coefficient(self.sell_rate)
        self.buy_rate = as_coefficient(self.buy_rate)
        if not self.spread_scale > 0:
            raise ConfigError("spread_scale must be positive")
        if not 0.0 < self.intensity_exponent < 1.0:
            raise ConfigError("intensity_exponent must lie in (0, 1)")
        if not 0.0 <= self.impact_fraction < 1.0:
            raise ConfigError("impact_fraction must lie in [0, 1)")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.initial_price > 0:
            raise ConfigError("initial_price must be positive")

    # -- derived quantities -------------------------------------------------

    def half_spread(self, t):
        return self.spread_scale * self.spread_factor(t)

    def sell_intensity(self, t):
        return self.sell_rate(t) * self.spread_scale ** (-self.intensity_exponent)

    def buy_intensity(self, t):
        return self.buy_rate(t) * self.spread_scale ** (-self.intensity_exponent)

    @property
    def risk_aversion_at_start(self) -> float:
        return absolute_risk_aversion(self.utility, self.initial_cash)

    @property
    def all_constant(self) -> bool:
        return all(is_constant(f) for f in
                   (self.volatility, self.spread_factor, self.sell_rate, self.buy_rate))

    def with_spread_scale(self, spread_scale: float) -> "ModelConfig":
        return replace(self, spread_scale=spread_scale)


def validate_config(config: ModelConfig, n_samples: int = 512) -> None:
    """Sampled admissibility checks on [0, horizon].

    All coefficient functions must be bounded and bounded away from zero on
    the sampling grid, and the relative half-spread must stay below one.
    Raises :class:`ConfigError` naming the offending field.
    """
    t = np.linspace(0.0, config.horizon, n_samples)
    for name in ("volatility", "spread_factor", "sell_rate", "buy_rate"):
        vals = np.asarray(getattr(config, name)(t), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ConfigError(f"{name} must be finite on [0, horizon]")
        if np.min(vals) <= 0:
            raise ConfigError(f"{name} must be bounded away from zero on [0, horizon]")
    eps = config.spread_scale * np.asarray(config.spread_factor(t), dtype=float)
    if np.max(eps) >= 1.0:
        raise ConfigError("spread_scale * spread_factor must stay below 1 on [0, horizon]")


@dataclass
class TimeGrid:
    t: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or len(self.t) < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("grid times must be strictly increasing")
        self.dt = np.diff(self.t)

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1

    @property
    def horizon(self) -> float:
        return float(self.t[-1])


def build_time_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Uniform grid of ``n_steps`` intervals on [0, horizon]."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return TimeGrid(np.linspace(0.0, float(horizon), int(n_steps) + 1))


@dataclass
class JumpTimes:
    """Arrival times of one counting process, tagged with the grid interval
    containing each (``grid_idx[j]`` is the right endpoint index)."""

    times: np.ndarray
    grid_idx: np.ndarray

    def __len__(self):
        return len(self.times)

    @staticmethod
    def from_times(times: np.ndarray, grid: TimeGrid) -> "JumpTimes":
        times = np.sort(np.asarray(times, dtype=float))
        idx = np.searchsorted(grid.t, times, side="left")
        return JumpTimes(times, idx.astype(np.int64))


@dataclass
class ArrivalTable:
    """Merged, time-ordered view of both arrival streams with the mid price
    immediately before and after each arrival (impact jumps included)."""

    time: np.ndarray
    grid_idx: np.ndarray
    side: np.ndarray          # Side the arrival switches the state to
    mid_before: np.ndarray
    mid_after: np.ndarray
    half_spread: np.ndarray   # relative half-spread at the snapped grid point

    def __len__(self):
        return len(self.time)


@dataclass
class MarketPath:
    """One simulated market realization on a grid.  ``mid`` includes impact
    jumps whenever the configuration carries a positive impact fraction."""

    grid: TimeGrid
    dW: np.ndarray
    mid: np.ndarray
    half_spread: np.ndarray
    jumps_sell: JumpTimes     # incoming sell orders (our bid-side fills)
    jumps_buy: JumpTimes      # incoming buy orders (our ask-side fills)
    side: np.ndarray
    arrivals: ArrivalTable


# -- simulation primitives ---------------------------------------------------

def simulate_mid_price(config: ModelConfig, grid: TimeGrid,
                       rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Diffusive mid price by the exact log scheme (no impact jumps).

    Returns ``(mid, dW)`` with
    ``mid[k+1] = mid[k] * exp(sig_k dW_k - sig_k^2 dt_k / 2)`` and the
    volatility frozen at the left endpoint of each step.
    """
    sig = np.asarray(config.volatility(grid.t[:-1]), dtype=float)
    dW = rng.standard_normal(grid.n_steps) * np.sqrt(grid.dt)
    log_inc = sig * dW - 0.5 * sig * sig * grid.dt
    mid = np.empty(grid.n_steps + 1)
    mid[0] = config.initial_price
    mid[1:] = config.initial_price * np.exp(np.cumsum(log_inc))
    return mid, dW


def _thin_stream(rate_fn, majorant: float, horizon: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Arrival times on (0, horizon] of an inhomogeneous Poisson process with
    intensity ``rate_fn``, drawn by thinning against the constant ``majorant``."""
    if majorant <= 0:
        return np.empty(0)
    n = rng.poisson(majorant * horizon)
    if n == 0:
        return np.empty(0)
    cand = rng.uniform(0.0, horizon, size=n)
    accept_p = np.minimum(np.asarray(rate_fn(cand), dtype=float) / majorant, 1.0)
    keep = rng.uniform(size=n) < accept_p
    times = np.sort(cand[keep])
    return times[times > 0.0]


def simulate_arrivals(config: ModelConfig, grid: TimeGrid,
                      rng_sell: np.random.Generator,
                      rng_buy: np.random.Generator) -> Tuple[JumpTimes, JumpTimes]:
    """Arrival streams of incoming sell and buy orders.

    The two streams use independent generators.  Floating-point collisions
    across (or within) streams are resolved by redrawing the buy stream's
    conflicting point, enforcing that the streams never jump together.
    """
    scale = config.spread_scale ** (-config.intensity_exponent)
    maj_sell = sup_on(config.sell_rate, config.horizon) * scale
    maj_buy = sup_on(config.buy_rate, config.horizon) * scale
    t_sell = np.unique(_thin_stream(config.sell_intensity, maj_sell, config.horizon, rng_sell))
    t_buy = np.unique(_thin_stream(config.buy_intensity, maj_buy, config.horizon, rng_buy))
    guard = 0
    while np.intersect1d(t_sell, t_buy).size > 0 and guard < 100:
        clash = np.isin(t_buy, t_sell)
        t_buy[clash] = rng_buy.uniform(0.0, config.horizon, size=int(clash.sum()))
        t_buy = np.unique(t_buy)
        guard += 1
    return JumpTimes.from_times(t_sell, grid), JumpTimes.from_times(t_buy, grid)


def compute_side_state(jumps_sell: JumpTimes, jumps_buy: JumpTimes,
                       grid: TimeGrid) -> np.ndarray:
    """Side state at each grid point.

    ``side[k]`` is BOUGHT iff the most recent arrival strictly before
    ``t[k]`` came from the sell stream; SOLD otherwise (including before the
    first arrival).
    """
    times, _, src = _merged_arrivals(jumps_sell, jumps_buy)
    count = np.searchsorted(times, grid.t, side="left")
    side = np.full(len(grid.t), Side.SOLD, dtype=np.int8)
    has_prior = count > 0
    side[has_prior] = src[count[has_prior] - 1]
    return side


def apply_impact_jumps(mid: np.ndarray, jumps_sell: JumpTimes, jumps_buy: JumpTimes,
                       half_spread: np.ndarray, kappa: float) -> np.ndarray:
    """Mid price with permanent impact jumps applied at the snapped arrivals.

    Incoming sell orders multiply the mid by ``1 - kappa * eps``, incoming
    buy orders by ``1 + kappa * eps``, with ``eps`` read off ``half_spread``
    at the snapped grid point.  ``kappa = 0`` returns a copy of the input.
    """
    mid = np.asarray(mid, dtype=float)
    out, _ = _impacted_mid_and_arrivals(mid, jumps_sell, jumps_buy,
                                        np.asarray(half_spread, dtype=float), kappa)
    return out


def simulate_market_path(config: ModelConfig, grid: TimeGrid, seed: int,
                         path_index: int = 0) -> MarketPath:
    """Full exogenous market realization for one path index."""
    mid, dW = simulate_mid_price(config, grid, path_rng(seed, path_index, "brownian"))
    jumps_sell, jumps_buy = simulate_arrivals(
        config, grid,
        path_rng(seed, path_index, "arrivals_sell"),
        path_rng(seed, path_index, "arrivals_buy"))
    half_spread = config.spread_scale * np.asarray(config.spread_factor(grid.t), dtype=float)
    side = compute_side_state(jumps_sell, jumps_buy, grid)
    mid_final, arrivals = _impacted_mid_and_arrivals(
        mid, jumps_sell, jumps_buy, half_spread, config.impact_fraction)
    return MarketPath(grid=grid, dW=dW, mid=mid_final, half_spread=half_spread,
                      jumps_sell=jumps_sell, jumps_buy=jumps_buy, side=side,
                      arrivals=arrivals)


# -- internals ----------------------------------------------------------------

def _merged_arrivals(jumps_sell: JumpTimes, jumps_buy: JumpTimes):
    times = np.concatenate([jumps_sell.times, jumps_buy.times])
    gidx = np.concatenate([jumps_sell.grid_idx, jumps_buy.grid_idx])
    side = np.concatenate([
        np.full(len(jumps_sell), Side.BOUGHT, dtype=np.int8),
        np.full(len(jumps_buy), Side.SOLD, dtype=np.int8),
    ])
    order = np.argsort(times, kind="stable")
    return times[order], gidx[order], side[order]


def _impacted_mid_and_arrivals(mid, jumps_sell, jumps_buy, half_spread, kappa):
    """Apply impact jumps and build the merged arrival table in one pass.

    Arrivals sharing a snapped grid point are compounded in time order; the
    table's ``mid_before`` is the price an arrival's fill settles against,
    i.e. the grid mid with this and later same-cell jump factors removed.
    """
    times, gidx, side = _merged_arrivals(jumps_sell, jumps_buy)
    m = len(times)
    eps = half_spread[gidx] if m else np.empty(0)
    if kappa != 0.0 and m:
        factors = np.where(side == Side.BOUGHT, 1.0 - kappa * eps, 1.0 + kappa * eps)
    else:
        factors = np.ones(m)
    cum = np.concatenate([[1.0], np.cumprod(factors)])
    if kappa != 0.0 and m:
        # arrival j settles against the diffusive mid compounded by every
        # strictly earlier jump factor (earlier cells and earlier same-cell)
        mid_before = mid[gidx] * cum[:-1]
        mid_after = mid[gidx] * cum[1:]
        # number of arrivals with snapped index <= k, for every grid point k
        count = np.searchsorted(gidx, np.arange(len(mid)), side="right")
        mid_out = mid * cum[count]
    else:
        mid_out = mid.copy()
        mid_before = mid[gidx] if m else np.empty(0)
        mid_after = mid_before.copy() if m else np.empty(0)
    table = ArrivalTable(time=times, grid_idx=gidx, side=side,
                         mid_before=mid_before, mid_after=mid_after,
                         half_spread=eps)
    return mid_out, table
