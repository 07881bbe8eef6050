"""Frictionless shadow market: a price inside the spread that matches every
execution of the quoting policy.

Between arrivals the shadow price is held at the quote ratio of the current
regime (bid side after a bought fill, ask side otherwise); at an arrival it
jumps to the executing side's quote.  This ratio construction realises the
drift corrections of the underlying dynamics exactly on the grid for the
deterministic spreads supported here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import MarketPath, ModelConfig, Side
from .utility import absolute_risk_aversion

__all__ = [
    "ShadowPath",
    "shadow_price_path",
    "frictionless_wealth",
    "shadow_terminal_wealth",
    "feedback_policy",
]


@dataclass
class ShadowPath:
    """Shadow price per grid point and the quote side it currently tracks.

    ``regime[k]`` is the side of the last arrival at or before ``t[k]``
    (ask tracking before the first arrival), in contrast to the strictly-
    before convention of ``MarketPath.side``; the two differ exactly at
    arrival grid points, where the shadow has already jumped.
    """

    price: np.ndarray
    regime: np.ndarray


def shadow_price_path(path: MarketPath, config: ModelConfig) -> ShadowPath:
    """Shadow price for one market realization.

    Without impact the price is ``(1 -+ eps_t) * mid_t`` on the bought/sold
    regime; with impact fraction kappa the ratios become
    ``(1 -+ eps_t) / (1 -+ kappa * eps_t)`` so that the price equals the
    pre-jump quote at every arrival.
    """
    grid = path.grid
    arr = path.arrivals
    count = np.searchsorted(arr.time, grid.t, side="right")
    regime = np.full(len(grid.t), Side.SOLD, dtype=np.int8)
    has = count > 0
    regime[has] = arr.side[count[has] - 1]
    eps = path.half_spread
    k = config.impact_fraction
    if k == 0.0:
        ratio = np.where(regime == Side.BOUGHT, 1.0 - eps, 1.0 + eps)
    else:
        ratio = np.where(regime == Side.BOUGHT,
                         (1.0 - eps) / (1.0 - k * eps),
                         (1.0 + eps) / (1.0 + k * eps))
    return ShadowPath(price=ratio * path.mid, regime=regime)


def frictionless_wealth(eta: np.ndarray, shadow: ShadowPath, x0: float = 0.0) -> float:
    """Terminal wealth of a monetary position path traded at the shadow price.

    ``eta[k]`` is the monetary position held over the step starting at grid
    point ``k`` (left-continuous sampling); jumps of the shadow price at
    arrival points fall inside the step returns.
    """
    price = shadow.price
    eta = np.asarray(eta, dtype=float)
    n = len(price) - 1
    if len(eta) not in (n, n + 1):
        raise ValueError("eta must have one entry per step (or per grid point)")
    returns = np.diff(price) / price[:-1]
    return float(x0 + np.dot(eta[:n], returns))


def shadow_terminal_wealth(strategy, ledger, path: MarketPath,
                           config: ModelConfig) -> float:
    """Terminal shadow-market wealth at arrival resolution.

    :func:`frictionless_wealth` samples the position once per grid step, which
    misses shadow-price jumps when several arrivals share a snapped grid cell;
    this variant rides each intra-cell jump with the position actually held
    between the fills (market orders are applied at the cell's right
    endpoint).  Every trade in the ledger executes at or worse than the
    shadow price at its instant, so this dominates the liquidation wealth of
    any strategy processed by the accounting conventions.
    """
    sh = shadow_price_path(path, config)
    arr = path.arrivals
    eps = path.half_spread
    k_imp = config.impact_fraction
    units = ledger.units
    x = config.initial_cash
    fills_by_cell = {}
    for f in strategy.fills:
        fills_by_cell.setdefault(f.grid_index, []).append(f)
    cells = np.unique(arr.grid_idx) if len(arr) else np.empty(0, dtype=int)
    arrivals_by_cell = {int(g): np.nonzero(arr.grid_idx == g)[0] for g in cells}
    s_prev = sh.price[0]
    phi = units[0]
    regime_prev = Side.SOLD
    for k in range(1, len(sh.price)):
        rows = arrivals_by_cell.get(k)
        if rows is None:
            x += phi * (sh.price[k] - s_prev)
        else:
            e = eps[k]
            if regime_prev == Side.BOUGHT:
                ratio = (1.0 - e) / (1.0 - k_imp * e) if k_imp else 1.0 - e
            else:
                ratio = (1.0 + e) / (1.0 + k_imp * e) if k_imp else 1.0 + e
            value = ratio * arr.mid_before[rows[0]]
            x += phi * (value - s_prev)
            fills = {f.arrival_index: f for f in fills_by_cell.get(k, [])}
            for j in rows:
                e_j = arr.half_spread[j]
                quote = (1.0 - e_j) if arr.side[j] == Side.BOUGHT else (1.0 + e_j)
                v_new = quote * arr.mid_before[j]
                x += phi * (v_new - value)
                value = v_new
                f = fills.get(int(j))
                if f is not None:
                    phi = phi + f.units if f.side == Side.BOUGHT else phi - f.units
            regime_prev = Side(int(arr.side[rows[-1]]))
        s_prev = sh.price[k]
        phi = units[k]
    return float(x)


def feedback_policy(shadow_wealth_so_far: float, t: float, side: int,
                    config: ModelConfig) -> float:
    """Monetary target of the wealth-adapted frictionless optimizer.

    Positive (buy-side intensity scaled) on the bought side, negative on the
    sold side; with constant absolute risk aversion it coincides with the
    trading boundaries of the base model.
    """
    ara = absolute_risk_aversion(config.utility, shadow_wealth_so_far)
    sig2 = float(config.volatility(t)) ** 2
    eps_t = float(config.half_spread(t))
    if side == Side.BOUGHT:
        return 2.0 * eps_t * float(config.buy_intensity(t)) / (ara * sig2)
    return -2.0 * eps_t * float(config.sell_intensity(t)) / (ara * sig2)
