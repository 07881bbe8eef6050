"""Self-financing bookkeeping: cash, units, trade log, liquidation wealth.

Execution conventions (shared with the policy module so the monetary
identities hold exactly on the grid):

* market orders accumulated over a step execute at the step's right endpoint
  against the current observable quote, i.e. at ``(1 +- eps_k) * mid_k``;
* executed quotes settle at the touch on the pre-jump mid of their snapped
  arrival point, ``(1 -+ eps) * mid_before``;
* long positions are marked at the bid, short positions at the ask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .market import MarketPath, ModelConfig, Side
from .policy import Strategy

__all__ = [
    "Trade",
    "PortfolioLedger",
    "evolve_portfolio",
    "liquidation_wealth",
    "max_risky_exposure",
]

KIND_MARKET_BUY = "market_buy"
KIND_MARKET_SELL = "market_sell"
KIND_LIMIT_BUY_FILL = "limit_buy_fill"
KIND_LIMIT_SELL_FILL = "limit_sell_fill"
KIND_LIQUIDATION = "liquidation"


@dataclass(frozen=True)
class Trade:
    time: float
    kind: str
    units: float
    price: float
    cash_after: float
    units_after: float


@dataclass
class PortfolioLedger:
    """Cash and risky units on the grid, with the trades that produced them."""

    cash: np.ndarray
    units: np.ndarray
    trades: List[Trade]
    liquidation_wealth: np.ndarray


def evolve_portfolio(strategy: Strategy, path: MarketPath, config: ModelConfig,
                     record_trades: bool = True) -> PortfolioLedger:
    """Run a strategy through the self-financing dynamics.

    Starts from ``(initial_cash, 0)``.  With ``record_trades=False`` the trade
    log is skipped (the state arrays are unchanged); used by the Monte Carlo
    hot path.
    """
    grid = path.grid
    n = grid.n_steps
    mid = path.mid
    eps = path.half_spread
    arrivals = path.arrivals

    cash_delta = np.zeros(n + 1)
    units_delta = np.zeros(n + 1)

    dmb = np.diff(strategy.market_buys)
    dms = np.diff(strategy.market_sells)
    ask = (1.0 + eps[1:]) * mid[1:]
    bid = (1.0 - eps[1:]) * mid[1:]
    cash_delta[1:] = dms * bid - dmb * ask
    units_delta[1:] = dmb - dms

    for f in strategy.fills:
        e = float(arrivals.half_spread[f.arrival_index])
        ref = float(arrivals.mid_before[f.arrival_index])
        if f.side == Side.BOUGHT:
            cash_delta[f.grid_index] -= f.units * (1.0 - e) * ref
            units_delta[f.grid_index] += f.units
        else:
            cash_delta[f.grid_index] += f.units * (1.0 + e) * ref
            units_delta[f.grid_index] -= f.units

    cash = config.initial_cash + np.cumsum(cash_delta)
    units = np.cumsum(units_delta)
    wealth = cash + np.where(units >= 0,
                             units * (1.0 - eps) * mid,
                             units * (1.0 + eps) * mid)

    trades: List[Trade] = []
    if record_trades:
        trades = _build_trade_log(strategy, path, config, dmb, dms)
    return PortfolioLedger(cash=cash, units=units, trades=trades,
                           liquidation_wealth=wealth)


def _build_trade_log(strategy, path, config, dmb, dms):
    """Chronological trade list with running cash/units.

    Market orders carry the grid timestamp of their execution point; fills
    retain their continuous arrival timestamp.  At a shared grid point the
    reflection push (accrued over the preceding interval) precedes the fill.
    """
    mid = path.mid
    eps = path.half_spread
    t = path.grid.t
    arrivals = path.arrivals
    liq_idx = getattr(strategy, "liquidation_index", None)

    fills_by_idx = {}
    for f in strategy.fills:
        fills_by_idx.setdefault(f.grid_index, []).append(f)

    events = []  # (grid_index, order_within_point, payload)
    for k in np.nonzero(dmb)[0]:
        events.append((k + 1, 0, ("mb", float(dmb[k]))))
    for k in np.nonzero(dms)[0]:
        events.append((k + 1, 0, ("ms", float(dms[k]))))
    for g, fs in fills_by_idx.items():
        for j, f in enumerate(fs):
            events.append((g, 1 + j, ("fill", f)))
    events.sort(key=lambda e: (e[0], e[1]))

    trades = []
    cash = config.initial_cash
    units = 0.0
    for g, _, payload in events:
        if payload[0] == "mb":
            q = payload[1]
            price = (1.0 + eps[g]) * mid[g]
            cash -= q * price
            units += q
            kind = KIND_LIQUIDATION if liq_idx == g else KIND_MARKET_BUY
            trades.append(Trade(float(t[g]), kind, q, price, cash, units))
        elif payload[0] == "ms":
            q = payload[1]
            price = (1.0 - eps[g]) * mid[g]
            cash += q * price
            units -= q
            kind = KIND_LIQUIDATION if liq_idx == g else KIND_MARKET_SELL
            trades.append(Trade(float(t[g]), kind, q, price, cash, units))
        else:
            f = payload[1]
            e = float(arrivals.half_spread[f.arrival_index])
            ref = float(arrivals.mid_before[f.arrival_index])
            if f.side == Side.BOUGHT:
                price = (1.0 - e) * ref
                cash -= f.units * price
                units += f.units
                kind = KIND_LIMIT_BUY_FILL
            else:
                price = (1.0 + e) * ref
                cash += f.units * price
                units -= f.units
                kind = KIND_LIMIT_SELL_FILL
            trades.append(Trade(f.time, kind, f.units, price, cash, units))
    return trades


def liquidation_wealth(ledger: PortfolioLedger, path: MarketPath, t: float) -> float:
    """Cash plus the risky position marked at the unfavorable quote at grid
    time ``t``."""
    idx = int(np.searchsorted(path.grid.t, t))
    if idx >= len(path.grid.t) or abs(path.grid.t[idx] - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the grid")
    return float(ledger.liquidation_wealth[idx])


def max_risky_exposure(ledger: PortfolioLedger, path: MarketPath) -> float:
    """Largest absolute monetary position along the path (admissibility
    monitor)."""
    return float(np.max(np.abs(ledger.units * path.mid)))
