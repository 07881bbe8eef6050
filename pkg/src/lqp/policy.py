"""Target boundaries, reflected inventory, and the induced order strategy.

The monetary position follows geometric dynamics between arrivals, jumps to
the current target boundary whenever an incoming order executes a quote, and
is kept inside the boundaries by the minimal reflection pushes (realised by
market orders).  The reflected path is built from the exact running-supremum
representation per inter-arrival excursion, evaluated on the grid, so
containment and jump targeting hold exactly rather than up to an Euler
projection error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .market import ArrivalTable, MarketPath, ModelConfig, Side

__all__ = [
    "Boundaries",
    "JumpMark",
    "InventoryPath",
    "LimitFill",
    "Strategy",
    "trading_boundaries",
    "boundary_paths",
    "reflected_inventory",
    "strategy_from_inventory",
    "candidate_strategy",
    "impact_policy",
    "BoundaryScaledPolicy",
]

#: relative reflection tolerance used by containment checks
REFLECTION_TOL = 1e-12


@dataclass(frozen=True)
class Boundaries:
    """Monetary target positions at one instant.  A degenerate flag marks a
    side whose raw formula turned nonpositive (impact too strong for the flow
    asymmetry); that side's target is clamped to zero, meaning nothing is
    quoted there."""

    lower: float
    upper: float
    lower_degenerate: bool = False
    upper_degenerate: bool = False


def boundary_paths(config: ModelConfig, times: np.ndarray):
    """Vectorised boundary targets at ``times``.

    Returns ``(lower, upper, lower_degenerate, upper_degenerate)`` arrays.
    With impact fraction kappa the raw numerators are
    ``(1 - kappa/2) * buy_intensity - (kappa/2) * sell_intensity`` for the
    upper side and the mirror image for the lower side; kappa = 0 reduces to
    the plain two-sided formula.
    """
    t = np.asarray(times, dtype=float)
    ara = config.risk_aversion_at_start
    sig2 = np.asarray(config.volatility(t), dtype=float) ** 2
    eps = config.spread_scale * np.asarray(config.spread_factor(t), dtype=float)
    a_sell = np.asarray(config.sell_intensity(t), dtype=float)
    a_buy = np.asarray(config.buy_intensity(t), dtype=float)
    k = config.impact_fraction
    num_up = (1.0 - 0.5 * k) * a_buy - 0.5 * k * a_sell
    num_lo = (1.0 - 0.5 * k) * a_sell - 0.5 * k * a_buy
    upper = 2.0 * eps * num_up / (ara * sig2)
    lower = -2.0 * eps * num_lo / (ara * sig2)
    up_deg = num_up <= 0
    lo_deg = num_lo <= 0
    upper = np.where(up_deg, 0.0, upper)
    lower = np.where(lo_deg, 0.0, lower)
    return lower, upper, lo_deg, up_deg


def trading_boundaries(t: float, config: ModelConfig) -> Boundaries:
    """Monetary trading boundaries at time ``t`` (risk aversion frozen at the
    initial cash position)."""
    lo, up, lo_deg, up_deg = boundary_paths(config, np.asarray([t], dtype=float))
    return Boundaries(lower=float(lo[0]), upper=float(up[0]),
                      lower_degenerate=bool(lo_deg[0]), upper_degenerate=bool(up_deg[0]))


@dataclass(frozen=True)
class JumpMark:
    """Inventory jump at one arrival."""

    time: float
    grid_index: int
    side: int
    position_before: float
    position_after: float


@dataclass
class InventoryPath:
    """Reflected monetary position with its push decomposition.

    ``push_up``/``push_down`` are the cumulative reflection adjustments
    (nondecreasing; up-pushes act at the lower boundary, down-pushes at the
    upper boundary).  ``upper``/``lower`` are the boundary arrays the path was
    reflected against.
    """

    position: np.ndarray
    push_up: np.ndarray
    push_down: np.ndarray
    jump_marks: List[JumpMark]
    upper: np.ndarray
    lower: np.ndarray


def _reflect(z: np.ndarray, arrivals: ArrivalTable, upper: np.ndarray,
             lower: np.ndarray, n_steps: int):
    """Core excursion-wise reflection.

    ``z`` holds the per-step log increments of the driving diffusive factor.
    Returns ``(position, dpsi, marks)`` where ``dpsi[k]`` is the signed
    reflection push over step ``k -> k+1`` (nonzero only on steps whose
    endpoint sits on a boundary).
    """
    n = n_steps
    position = np.zeros(n + 1)
    dpsi = np.zeros(n)
    marks: List[JumpMark] = []
    m = len(arrivals)
    if m == 0:
        return position, dpsi, marks
    Z = np.concatenate([[0.0], np.cumsum(z)])
    growth = np.exp(z)
    gidx = arrivals.grid_idx
    pre = 0.0
    for j in range(m):
        g = int(gidx[j])
        s = int(arrivals.side[j])
        e = int(gidx[j + 1]) if j + 1 < m else n
        target = float(upper[g]) if s == Side.BOUGHT else float(lower[g])
        marks.append(JumpMark(time=float(arrivals.time[j]), grid_index=g, side=s,
                              position_before=pre, position_after=target))
        position[g] = target
        if e == g:
            pre = target
            continue
        if target == 0.0:
            # degenerate side: 0 is absorbing for the geometric dynamics
            position[g + 1:e + 1] = 0.0
            pre = 0.0
            continue
        ZZ = Z[g:e + 1] - Z[g]
        with np.errstate(divide="ignore"):
            if s == Side.BOUGHT:
                q = ZZ - np.log(upper[g:e + 1])
                M = np.maximum.accumulate(q)
                seg = np.exp(ZZ - M)
            else:
                q = ZZ - np.log(-lower[g:e + 1])
                M = np.maximum.accumulate(q)
                seg = -np.exp(ZZ - M)
        seg[0] = target
        position[g + 1:e + 1] = seg[1:]
        # reflection is charged only on steps where the supremum advances,
        # which is exactly when the step endpoint lands on the boundary
        raw = seg[1:] - seg[:-1] * growth[g:e]
        dpsi[g:e] = np.where(np.diff(M) > 0, raw, 0.0)
        pre = float(seg[-1])
    return position, dpsi, marks


def reflected_inventory(path: MarketPath, config: ModelConfig) -> InventoryPath:
    """Reflected monetary position for the candidate policy.

    The position starts at zero and stays there until the first arrival, then
    jumps to the side's boundary at every arrival and is reflected at the
    boundaries in between.
    """
    grid = path.grid
    lower, upper, _, _ = boundary_paths(config, grid.t)
    sig = np.asarray(config.volatility(grid.t[:-1]), dtype=float)
    z = sig * path.dW - 0.5 * sig * sig * grid.dt
    position, dpsi, marks = _reflect(z, path.arrivals, upper, lower, grid.n_steps)
    up_inc = np.maximum(dpsi, 0.0)
    dn_inc = np.maximum(-dpsi, 0.0)
    push_up = np.concatenate([[0.0], np.cumsum(up_inc)])
    push_down = np.concatenate([[0.0], np.cumsum(dn_inc)])
    return InventoryPath(position=position, push_up=push_up, push_down=push_down,
                         jump_marks=marks, upper=upper, lower=lower)


@dataclass(frozen=True)
class LimitFill:
    """Executed quote at one arrival; ``arrival_index`` refers to the row of
    the path's arrival table, ``units`` is the executed size in units of the
    risky asset (nonnegative; direction given by ``side``)."""

    arrival_index: int
    time: float
    grid_index: int
    side: int
    units: float


@dataclass
class Strategy:
    """Unit-denominated order strategy on the grid.

    ``market_buys``/``market_sells`` are cumulative market-order units; the
    limit size arrays hold the quotes in force at each grid point (refreshed
    costlessly); ``fills`` records the executed quotes.
    """

    market_buys: np.ndarray
    market_sells: np.ndarray
    limit_buy_size: np.ndarray
    limit_sell_size: np.ndarray
    fills: List[LimitFill]
    liquidation_index: Optional[int] = None


def strategy_from_inventory(inv: InventoryPath, path: MarketPath) -> Strategy:
    """Orders realising a reflected inventory path.

    Market orders execute the reflection pushes (units = push / mid at the
    step endpoint); quotes are sized to jump to the boundaries.
    """
    mid = path.mid
    up_inc = np.diff(inv.push_up)
    dn_inc = np.diff(inv.push_down)
    market_buys = np.concatenate([[0.0], np.cumsum(up_inc / mid[1:])])
    market_sells = np.concatenate([[0.0], np.cumsum(dn_inc / mid[1:])])
    limit_buy = np.maximum(inv.upper - inv.position, 0.0) / mid
    limit_sell = np.maximum(inv.position - inv.lower, 0.0) / mid
    fills = []
    for j, mark in enumerate(inv.jump_marks):
        ref = path.arrivals.mid_before[j]
        if mark.side == Side.BOUGHT:
            units = (mark.position_after - mark.position_before) / ref
        else:
            units = (mark.position_before - mark.position_after) / ref
        fills.append(LimitFill(arrival_index=j, time=mark.time,
                               grid_index=mark.grid_index, side=mark.side,
                               units=units))
    return Strategy(market_buys=market_buys, market_sells=market_sells,
                    limit_buy_size=limit_buy, limit_sell_size=limit_sell,
                    fills=fills)


def candidate_strategy(path: MarketPath, config: ModelConfig) -> Strategy:
    """Reflected-boundary strategy of the base model."""
    return strategy_from_inventory(reflected_inventory(path, config), path)


@dataclass(frozen=True)
class BoundaryScaledPolicy:
    """Candidate variant reflecting on rescaled boundaries; used for
    perturbation and scaling audits."""

    upper_scale: float = 1.0
    lower_scale: float = 1.0

    def __call__(self, path: MarketPath, config: ModelConfig) -> Strategy:
        grid = path.grid
        lower, upper, _, _ = boundary_paths(config, grid.t)
        upper = upper * self.upper_scale
        lower = lower * self.lower_scale
        sig = np.asarray(config.volatility(grid.t[:-1]), dtype=float)
        z = sig * path.dW - 0.5 * sig * sig * grid.dt
        position, dpsi, marks = _reflect(z, path.arrivals, upper, lower, grid.n_steps)
        push_up = np.concatenate([[0.0], np.cumsum(np.maximum(dpsi, 0.0))])
        push_down = np.concatenate([[0.0], np.cumsum(np.maximum(-dpsi, 0.0))])
        inv = InventoryPath(position=position, push_up=push_up, push_down=push_down,
                            jump_marks=marks, upper=upper, lower=lower)
        return strategy_from_inventory(inv, path)


def impact_policy(path: MarketPath, config: ModelConfig
                  ) -> Tuple[Strategy, Optional[float]]:
    """Limit-order-only policy for the price-impact model.

    No reflection market orders are used; the position evolves freely between
    arrivals.  If the monetary position exits the widened band
    ``[2 * lower_t, 2 * upper_t]`` the portfolio is liquidated with a single
    market order at the prevailing bid/ask and trading stops.  Returns the
    strategy and the stop time (``None`` if never triggered).
    """
    grid = path.grid
    n = grid.n_steps
    mid = path.mid
    lower, upper, _, _ = boundary_paths(config, grid.t)
    arrivals = path.arrivals
    m = len(arrivals)

    market_buys = np.zeros(n + 1)
    market_sells = np.zeros(n + 1)
    position = np.zeros(n + 1)
    fills: List[LimitFill] = []
    units = 0.0
    stop_idx: Optional[int] = None

    prev = 0
    for j in range(m + 1):
        # free evolution over grid points [prev, seg_end] (no trades there)
        seg_end = int(arrivals.grid_idx[j]) - 1 if j < m else n
        if seg_end >= prev:
            seg = units * mid[prev:seg_end + 1]
            position[prev:seg_end + 1] = seg
            outside = (seg > 2.0 * upper[prev:seg_end + 1]) | \
                      (seg < 2.0 * lower[prev:seg_end + 1])
            hits = np.nonzero(outside)[0]
            if len(hits):
                stop_idx = prev + int(hits[0])
                break
        if j == m:
            break
        # quote executes against the pre-jump mid at the snapped point
        g = int(arrivals.grid_idx[j])
        ref = float(arrivals.mid_before[j])
        pre_monetary = units * ref
        if int(arrivals.side[j]) == Side.BOUGHT:
            fill_units = max(0.0, upper[g] - pre_monetary) / ref
            units += fill_units
        else:
            fill_units = max(0.0, pre_monetary - lower[g]) / ref
            units -= fill_units
        if fill_units > 0.0:
            fills.append(LimitFill(arrival_index=j, time=float(arrivals.time[j]),
                                   grid_index=g, side=int(arrivals.side[j]),
                                   units=fill_units))
        position[g] = units * mid[g]
        if (position[g] > 2.0 * upper[g]) or (position[g] < 2.0 * lower[g]):
            stop_idx = g
            break
        prev = g + 1

    if stop_idx is not None:
        k = stop_idx
        if units > 0:
            market_sells[k:] = units
        elif units < 0:
            market_buys[k:] = -units
        position[k + 1:] = 0.0
        stop_time = float(grid.t[k])
    else:
        stop_time = None

    live = np.ones(n + 1, dtype=bool)
    if stop_idx is not None:
        live[stop_idx:] = False
    limit_buy = np.where(live, np.maximum(upper - position, 0.0) / mid, 0.0)
    limit_sell = np.where(live, np.maximum(position - lower, 0.0) / mid, 0.0)
    strat = Strategy(market_buys=market_buys, market_sells=market_sells,
                     limit_buy_size=limit_buy, limit_sell_size=limit_sell,
                     fills=fills, liquidation_index=stop_idx)
    return strat, stop_time
