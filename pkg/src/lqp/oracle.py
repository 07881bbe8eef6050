"""Exact dynamic-programming audit on small discretized instances.

The surrogate market evolves in ``n_periods`` rounds.  Positions are monetary
exposures on a symmetric grid; each round the agent may first rebalance with
a market order (paying the half-spread on the traded amount), the mid then
moves by the symmetric factor pair ``(u, 2 - u)`` with equal probabilities
(zero-mean increment, so holding exposure is a fair bet), and finally each
order stream executes independently with its per-period fill probability.
A fill moves the exposure to the posted target, earns the half-spread on the
executed amount, and, with impact, transfers ``kappa * eps`` times the
post-fill exposure out of (into) wealth for bought (sold) fills.  Simultaneous
fills are resolved in random order.  Exposures stay on the grid throughout:
the diffusive move pays the mark-to-market increment on the held exposure
without rescaling it, and impact enters as a pure wealth transfer.  Terminal
wealth is marked at the touch (liquidation pays the half-spread once).

For exponential utility the wealth coordinate factorizes out of the value
function and the backward induction is exact.  For other utilities wealth is
bucketed on an adaptive grid (nearest-bucket transitions; the bucket width is
reported on the result).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .utility import (UtilitySpec, absolute_risk_aversion, exponential_utility,
                      utility_value)
from .coefficients import constant_value
from .market import ModelConfig

__all__ = [
    "ResourceError",
    "DiscreteInstance",
    "DPResult",
    "discretize_instance",
    "dp_optimal_utility",
    "enumerate_one_period",
    "candidate_targets",
    "refinement_value_bound",
    "instance_to_json",
    "instance_from_json",
    "result_to_json",
]

MAX_PERIODS = 12
MAX_STATES = 10_000_000
MAX_GRID_POINTS = 301


class ResourceError(RuntimeError):
    """State space too large for the exhaustive audit."""


@dataclass
class DiscreteInstance:
    """Small discrete surrogate of the market for exhaustive optimization."""

    n_periods: int
    up_factor: float
    fill_prob_sell: float      # per-period probability of a bid-side execution
    fill_prob_buy: float       # per-period probability of an ask-side execution
    half_spread: float
    impact_fraction: float
    grid_step: float
    grid_bound: float
    dt: float
    initial_cash: float = 0.0
    utility: UtilitySpec = field(default_factory=lambda: exponential_utility(1.0))

    def __post_init__(self):
        if not 1 <= self.n_periods <= MAX_PERIODS:
            raise ValueError(f"n_periods must be in [1, {MAX_PERIODS}]")
        if not 1.0 <= self.up_factor < 2.0:
            raise ValueError("up_factor must lie in [1, 2) so both move factors are positive")
        for name in ("fill_prob_sell", "fill_prob_buy"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.half_spread < 0:
            raise ValueError("half_spread must be nonnegative")
        if not 0.0 <= self.impact_fraction < 1.0:
            raise ValueError("impact_fraction must lie in [0, 1)")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if self.grid_bound < self.grid_step:
            raise ValueError("grid_bound must be at least grid_step")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def position_grid(self) -> np.ndarray:
        m = int(math.floor(self.grid_bound / self.grid_step + 1e-9))
        return self.grid_step * np.arange(-m, m + 1, dtype=float)


def discretize_instance(config: ModelConfig, n_periods: int, grid_step: float,
                        bound: Optional[float] = None,
                        dt: Optional[float] = None) -> DiscreteInstance:
    """Discrete surrogate of a constant-coefficient configuration.

    ``up_factor = exp(sigma sqrt(dt))`` and the fill probabilities are the
    per-period arrival probabilities ``1 - exp(-intensity * dt)``.  ``dt``
    defaults to ``horizon / n_periods`` and must tile the horizon exactly.
    """
    try:
        sigma = constant_value(config.volatility)
        efac = constant_value(config.spread_factor)
        lam_sell = constant_value(config.sell_rate)
        lam_buy = constant_value(config.buy_rate)
    except ValueError as exc:
        raise ValueError("discretize_instance requires constant coefficients") from exc
    if dt is None:
        dt = config.horizon / n_periods
    if abs(n_periods * dt - config.horizon) > 1e-12 * max(1.0, config.horizon):
        raise ValueError("n_periods * dt must equal the horizon")
    scale = config.spread_scale ** (-config.intensity_exponent)
    q_sell = 1.0 - math.exp(-lam_sell * scale * dt)
    q_buy = 1.0 - math.exp(-lam_buy * scale * dt)
    eps = config.spread_scale * efac
    inst = DiscreteInstance(
        n_periods=n_periods,
        up_factor=math.exp(sigma * math.sqrt(dt)),
        fill_prob_sell=q_sell,
        fill_prob_buy=q_buy,
        half_spread=eps,
        impact_fraction=config.impact_fraction,
        grid_step=float(grid_step),
        grid_bound=1.0,  # placeholder, fixed below
        dt=float(dt),
        initial_cash=config.initial_cash,
        utility=config.utility,
    )
    if bound is None:
        up, lo = candidate_targets(inst)
        ref = max(abs(up), abs(lo), 4.0 * grid_step)
        bound = 2.5 * ref
    inst.grid_bound = float(bound)
    if inst.grid_bound < inst.grid_step:
        raise ValueError("grid_bound must be at least grid_step")
    return inst


def candidate_targets(instance: DiscreteInstance) -> Tuple[float, float]:
    """Boundary targets implied by the instance parameters (continuous-model
    formula with the rates recovered from the fill probabilities), clamped at
    zero on a degenerate side."""
    if instance.half_spread == 0.0:
        return 0.0, 0.0
    sig2 = (math.log(instance.up_factor) ** 2) / instance.dt
    if sig2 == 0.0:
        raise ValueError("candidate targets undefined for zero volatility")
    a_sell = -math.log1p(-instance.fill_prob_sell) / instance.dt
    a_buy = -math.log1p(-instance.fill_prob_buy) / instance.dt
    ara = absolute_risk_aversion(instance.utility, instance.initial_cash)
    k = instance.impact_fraction
    num_up = (1.0 - 0.5 * k) * a_buy - 0.5 * k * a_sell
    num_lo = (1.0 - 0.5 * k) * a_sell - 0.5 * k * a_buy
    upper = max(0.0, 2.0 * instance.half_spread * num_up / (ara * sig2))
    lower = min(0.0, -2.0 * instance.half_spread * num_lo / (ara * sig2))
    return upper, lower


@dataclass
class DPResult:
    """Backward-induction output.

    ``policy_*`` arrays are indexed ``[period][side][position index]`` with
    side 0 = bought, 1 = sold, and hold the chosen grid values: the post-
    market-order exposure and the two posted fill targets.  ``gap`` is
    ``optimal_value - candidate_value`` and is nonnegative up to arithmetic
    slack by construction.
    """

    optimal_value: float
    candidate_value: float
    gap: float
    position_grid: np.ndarray
    policy_market_target: np.ndarray
    policy_fill_target_buy: np.ndarray   # target after a bid-side execution
    policy_fill_target_sell: np.ndarray  # target after an ask-side execution
    refinement_value_bound: float
    wealth_bucket_width: Optional[float] = None


# -- transition terms (shared by optimal and candidate passes) ----------------

def _period_tables(instance: DiscreteInstance, g: np.ndarray):
    """Index maps and wealth increments of the fill outcomes.

    Returns dict with, for all (a, b) index pairs: the post-sell-fill index
    ``i1 = max(a, b)`` and its earn; for (a, c): ``i2 = min(a, c)`` and earn;
    and the two simultaneous-fill orderings.
    """
    m1 = len(g)
    eps = instance.half_spread
    kap = instance.impact_fraction
    idx = np.arange(m1)
    A = idx[:, None]
    B = idx[None, :]
    i1 = np.maximum(A, B)                    # sell arrival: trade up to target b
    e1 = eps * (g[i1] - g[A]) - kap * eps * g[i1]
    i2 = np.minimum(A, B)                    # buy arrival: trade down to target c
    e2 = eps * (g[A] - g[i2]) + kap * eps * g[i2]
    return {"i1": i1, "e1": e1, "i2": i2, "e2": e2}


def _zero_first_order(g: np.ndarray) -> np.ndarray:
    """Grid indices ordered by (|value|, value): scanning in this order makes
    first-minimum ties resolve toward the smallest exposure."""
    return np.lexsort((g, np.abs(g)))


_TIE_TOL = 1e-14


def _first_near_min(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Index of the first entry within a relative tie tolerance of the minimum
    along ``axis`` (entries are positive); keeps flat optima deterministic."""
    vmin = np.min(values, axis=axis, keepdims=True)
    return np.argmax(values <= vmin * (1.0 + _TIE_TOL), axis=axis)


def _backward_exponential(instance: DiscreteInstance):
    """Exact backward induction for exponential utility.

    The value at (period, side, position, wealth X) factorizes as
    ``-exp(-c X) * G[side, position]``; this returns the G tables per period
    together with the optimal action indices.
    """
    g = instance.position_grid
    m1 = len(g)
    if m1 > MAX_GRID_POINTS:
        raise ResourceError(
            f"position grid has {m1} points (> {MAX_GRID_POINTS}); "
            "use a coarser grid_step or smaller grid_bound")
    n = instance.n_periods
    if n * 2 * m1 > MAX_STATES:
        raise ResourceError("state space exceeds the audit limit; coarsen the grid")
    c = instance.utility.risk_aversion
    eps = instance.half_spread
    kap = instance.impact_fraction
    q1, q2 = instance.fill_prob_sell, instance.fill_prob_buy
    mv = instance.up_factor - 1.0
    p00 = (1 - q1) * (1 - q2)
    p10 = q1 * (1 - q2)
    p01 = (1 - q1) * q2
    p11 = q1 * q2

    tab = _period_tables(instance, g)
    i1, e1, i2, e2 = tab["i1"], tab["e1"], tab["i2"], tab["e2"]
    order = _zero_first_order(g)
    cosh_av = np.cosh(c * g * mv)
    move_cost = np.exp(c * eps * np.abs(g[:, None] - g[None, :]))  # [a, i]

    # G[side, i]; side index 0 = bought, 1 = sold
    G = np.exp(c * eps * np.abs(g))[None, :].repeat(2, axis=0)
    a_star = np.zeros((n, 2, m1), dtype=np.int64)
    b_star = np.zeros((n, 2, m1), dtype=np.int64)
    c_star = np.zeros((n, 2, m1), dtype=np.int64)

    for k in range(n - 1, -1, -1):
        w1 = np.exp(-c * e1) * G[0][i1]        # sell-arrival-only, per (a, b)
        w2 = np.exp(-c * e2) * G[1][i2]        # buy-arrival-only, per (a, c)
        restmin = np.full(m1, np.inf)
        bwin = np.zeros(m1, dtype=np.int64)
        cwin = np.zeros(m1, dtype=np.int64)
        if p11 > 0.0:
            idx = np.arange(m1)
            k2_ac = np.minimum(idx[:, None], idx[None, :])
            e21a = eps * (g[:, None] - g[k2_ac]) + kap * eps * g[k2_ac]
            for b in order:                    # slab over the bid-side target
                j1 = np.maximum(idx, b)                      # per a
                e12a = eps * (g[j1] - g) - kap * eps * g[j1]
                j2 = np.minimum(j1[:, None], idx[None, :])
                e12 = e12a[:, None] + eps * (g[j1][:, None] - g[j2]) + kap * eps * g[j2]
                v12 = np.exp(-c * e12) * G[1][j2]
                k1 = np.maximum(k2_ac, b)
                e21 = e21a + eps * (g[k1] - g[k2_ac]) - kap * eps * g[k1]
                v21 = np.exp(-c * e21) * G[0][k1]
                slab = (p10 * w1[:, b])[:, None] + p01 * w2 \
                    + 0.5 * p11 * (v12 + v21)
                slab_o = slab[:, order]
                cidx = _first_near_min(slab_o, axis=1)
                cmin = slab_o[np.arange(m1), cidx]
                better = cmin < restmin * (1.0 - _TIE_TOL)
                restmin[better] = cmin[better]
                bwin[better] = b
                cwin[better] = order[cidx[better]]
        else:
            w2_o = w2[:, order]
            cidx = _first_near_min(w2_o, axis=1)
            base2 = p01 * w2_o[np.arange(m1), cidx]
            w1_o = w1[:, order]
            bidx = _first_near_min(w1_o, axis=1)
            restmin = p10 * w1_o[np.arange(m1), bidx] + base2
            bwin = order[bidx]
            cwin = order[cidx]
        G_new = np.empty_like(G)
        for s in range(2):
            core = cosh_av * (p00 * G[s] + restmin)          # per a
            total = move_cost * core[:, None]                # [a, i]
            total_o = total[order, :]
            aidx = _first_near_min(total_o, axis=0)
            a_sel = order[aidx]
            G_new[s] = total[a_sel, np.arange(m1)]
            a_star[k, s] = a_sel
            b_star[k, s] = bwin[a_sel]
            c_star[k, s] = cwin[a_sel]
        G = G_new
    return G, a_star, b_star, c_star


def _candidate_value_exponential(instance: DiscreteInstance) -> float:
    """Value of the forced boundary policy: targets rounded to the grid and
    market orders clamping the exposure into the rounded band."""
    g = instance.position_grid
    m1 = len(g)
    c = instance.utility.risk_aversion
    eps = instance.half_spread
    kap = instance.impact_fraction
    q1, q2 = instance.fill_prob_sell, instance.fill_prob_buy
    mv = instance.up_factor - 1.0
    p00 = (1 - q1) * (1 - q2)
    p10 = q1 * (1 - q2)
    p01 = (1 - q1) * q2
    p11 = q1 * q2
    up, lo = candidate_targets(instance)
    b_c = int(np.argmin(np.abs(g - up)))
    c_c = int(np.argmin(np.abs(g - lo)))
    idx = np.arange(m1)
    a_map = np.clip(idx, c_c, b_c)

    G = np.exp(c * eps * np.abs(g))[None, :].repeat(2, axis=0)
    for _ in range(instance.n_periods):
        # outcome terms per post-market position index (axis = a)
        i1 = np.maximum(idx, b_c)
        e1 = eps * (g[i1] - g) - kap * eps * g[i1]
        w1 = np.exp(-c * e1) * G[0][i1]
        i2 = np.minimum(idx, c_c)
        e2 = eps * (g - g[i2]) + kap * eps * g[i2]
        w2 = np.exp(-c * e2) * G[1][i2]
        j2 = np.minimum(i1, c_c)
        e12 = e1 + eps * (g[i1] - g[j2]) + kap * eps * g[j2]
        v12 = np.exp(-c * e12) * G[1][j2]
        k1 = np.maximum(i2, b_c)
        e21 = e2 + eps * (g[k1] - g[i2]) - kap * eps * g[k1]
        v21 = np.exp(-c * e21) * G[0][k1]
        rest = p10 * w1 + p01 * w2 + 0.5 * p11 * (v12 + v21)
        G_new = np.empty_like(G)
        for s in range(2):
            core = np.cosh(c * g * mv) * (p00 * G[s] + rest)
            G_new[s] = np.exp(c * eps * np.abs(g[a_map] - g)) * core[a_map]
        G = G_new
    i0 = int(np.argmin(np.abs(g)))
    return float(-math.exp(-c * instance.initial_cash) * G[1, i0])


def dp_optimal_utility(instance: DiscreteInstance) -> DPResult:
    """Exhaustive backward induction over (period, side, position[, wealth]).

    Starts at zero exposure, sold side, wealth ``initial_cash``.  The
    candidate value forces the boundary targets rounded to the grid; the gap
    is nonnegative up to arithmetic slack because the optimum dominates by
    construction.
    """
    g = instance.position_grid
    i0 = int(np.argmin(np.abs(g)))
    if instance.utility.kind == "exponential":
        G, a_star, b_star, c_star = _backward_exponential(instance)
        c = instance.utility.risk_aversion
        optimal = float(-math.exp(-c * instance.initial_cash) * G[1, i0])
        cand = _candidate_value_exponential(instance)
        width = None
    else:
        optimal, a_star, b_star, c_star, cand, width = _backward_bucketed(instance)
    return DPResult(
        optimal_value=optimal,
        candidate_value=cand,
        gap=optimal - cand,
        position_grid=g,
        policy_market_target=g[a_star],
        policy_fill_target_buy=g[b_star],
        policy_fill_target_sell=g[c_star],
        refinement_value_bound=refinement_value_bound(instance),
        wealth_bucket_width=width,
    )


def _backward_bucketed(instance: DiscreteInstance):
    """Wealth-bucketed backward induction for non-exponential utilities.

    Wealth transitions use nearest-bucket lookups on an adaptive grid wide
    enough to contain every reachable wealth; the bucket width is returned so
    callers can judge the induced truncation error.
    """
    g = instance.position_grid
    m1 = len(g)
    n = instance.n_periods
    eps = instance.half_spread
    kap = instance.impact_fraction
    q1, q2 = instance.fill_prob_sell, instance.fill_prob_buy
    mv = instance.up_factor - 1.0
    p00 = (1 - q1) * (1 - q2)
    p10 = q1 * (1 - q2)
    p01 = (1 - q1) * q2
    p11 = q1 * q2
    gmax = float(np.max(np.abs(g)))
    radius = n * gmax * (mv + 8.0 * eps * (1.0 + kap)) + eps * gmax + 1e-9
    n_buckets = 513
    while n * 2 * m1 * n_buckets > MAX_STATES and n_buckets > 65:
        n_buckets = (n_buckets - 1) // 2 + 1
    if m1 > 81 or n * 2 * m1 * n_buckets > MAX_STATES:
        raise ResourceError("instance too large for the bucketed audit; "
                            "coarsen grid_step or shrink grid_bound")
    x0 = instance.initial_cash
    wgrid = np.linspace(x0 - radius, x0 + radius, n_buckets)
    width = float(wgrid[1] - wgrid[0])

    def bucket(values):
        return np.clip(np.round((values - wgrid[0]) / width).astype(np.int64),
                       0, n_buckets - 1)

    order = _zero_first_order(g)
    idx = np.arange(m1)
    up_t, lo_t = candidate_targets(instance)
    b_c = int(np.argmin(np.abs(g - up_t)))
    c_c = int(np.argmin(np.abs(g - lo_t)))
    a_forced = np.clip(idx, c_c, b_c)

    i1_ab = np.maximum(idx[:, None], idx[None, :])              # [a, b]
    e1_ab = eps * (g[i1_ab] - g[:, None]) - kap * eps * g[i1_ab]
    i2_ac = np.minimum(idx[:, None], idx[None, :])              # [a, c]
    e2_ac = eps * (g[:, None] - g[i2_ac]) + kap * eps * g[i2_ac]

    terminal = np.asarray(utility_value(
        instance.utility,
        wgrid[None, :] - eps * np.abs(g)[:, None]), dtype=float)
    V_opt = terminal[None, :, :].repeat(2, axis=0)              # [s, i, w]
    V_cand = V_opt.copy()
    a_star = np.zeros((n, 2, m1, n_buckets), dtype=np.int64)
    b_star = np.zeros((n, 2, m1, n_buckets), dtype=np.int64)
    c_star = np.zeros((n, 2, m1, n_buckets), dtype=np.int64)

    def action_values(V_next, a):
        """Post-market-order continuation values per (side, b, c, bucket)."""
        acc = np.zeros((m1, m1, n_buckets))
        nf = np.zeros((2, n_buckets))
        for z in (1.0, -1.0):
            d0 = g[a] * mv * z
            wb = bucket(wgrid + d0)
            nf += 0.5 * p00 * V_next[:, a, :][:, wb]
            f1 = V_next[0][i1_ab[a][:, None],
                           bucket(wgrid[None, :] + d0 + e1_ab[a][:, None])]   # [b, w]
            f2 = V_next[1][i2_ac[a][:, None],
                           bucket(wgrid[None, :] + d0 + e2_ac[a][:, None])]   # [c, w]
            part = p10 * f1[:, None, :] + p01 * f2[None, :, :]
            if p11 > 0.0:
                j1 = i1_ab[a]                                   # [b]
                j2 = np.minimum(j1[:, None], idx[None, :])      # [b, c]
                e12 = (e1_ab[a][:, None] + eps * (g[j1][:, None] - g[j2])
                       + kap * eps * g[j2])
                v12 = V_next[1][j2[:, :, None],
                                bucket(wgrid[None, None, :] + d0 + e12[:, :, None])]
                k2 = i2_ac[a][None, :].repeat(m1, axis=0)       # [b, c]
                k1 = np.maximum(k2, idx[:, None])               # [b, c]
                e21 = (e2_ac[a][None, :] + eps * (g[k1] - g[k2])
                       - kap * eps * g[k1])
                v21 = V_next[0][k1[:, :, None],
                                bucket(wgrid[None, None, :] + d0 + e21[:, :, None])]
                part = part + 0.5 * p11 * (v12 + v21)
            acc += 0.5 * part
        return nf, acc

    for k in range(n - 1, -1, -1):
        best = np.full((2, m1, n_buckets), -np.inf)
        V_cand_new = np.empty_like(V_cand)
        for a in order:
            nf, acc = action_values(V_opt, a)
            shift = bucket(wgrid[None, :] - eps * np.abs(g[a] - g)[:, None])  # [i, w]
            for s in range(2):
                total = nf[s][None, None, :] + acc              # [b, c, w]
                flat = total[np.ix_(order, order)].reshape(m1 * m1, n_buckets)
                pick = np.argmax(flat, axis=0)
                vals = flat[pick, np.arange(n_buckets)]         # [w]
                cand = vals[shift]                              # [i, w]
                improved = cand > best[s]
                if np.any(improved):
                    best[s][improved] = cand[improved]
                    a_star[k, s][improved] = a
                    b_req = order[pick // m1]
                    c_req = order[pick % m1]
                    bc_b = np.broadcast_to(b_req[None, :], (m1, n_buckets))
                    bc_c = np.broadcast_to(c_req[None, :], (m1, n_buckets))
                    b_star[k, s][improved] = bc_b[improved]
                    c_star[k, s][improved] = bc_c[improved]
        for a in np.unique(a_forced):
            nf_c, acc_c = action_values(V_cand, a)
            rows = np.nonzero(a_forced == a)[0]
            shift = bucket(wgrid[None, :] - eps * np.abs(g[a] - g[rows])[:, None])
            for s in range(2):
                vals = nf_c[s] + acc_c[b_c, c_c, :]
                V_cand_new[s][rows] = vals[shift]
        V_opt = best
        V_cand = V_cand_new

    i0 = int(np.argmin(np.abs(g)))
    w0 = int(bucket(np.asarray([x0]))[0])
    optimal = float(V_opt[1, i0, w0])
    cand = float(V_cand[1, i0, w0])
    return optimal, a_star, b_star, c_star, cand, width


def refinement_value_bound(instance: DiscreteInstance) -> float:
    """Conservative curvature bound on the value change from halving the
    position grid step: half the largest |U''| over the reachable wealth
    range times the squared step times a per-period variance factor."""
    g = instance.position_grid
    gmax = float(np.max(np.abs(g)))
    mv = instance.up_factor - 1.0
    eps = instance.half_spread
    radius = instance.n_periods * gmax * (mv + 8.0 * eps * (1.0 + instance.impact_fraction))
    if instance.utility.kind == "exponential":
        c = instance.utility.risk_aversion
        max_u2 = c * c * math.exp(-c * (instance.initial_cash - radius))
    else:
        w = np.linspace(instance.initial_cash - radius, instance.initial_cash + radius, 257)
        max_u2 = float(np.max(np.abs(instance.utility.second_deriv_fn(w))))
    var_factor = instance.n_periods * (mv * mv + 1.0)
    return 0.5 * max_u2 * instance.grid_step ** 2 * var_factor


def enumerate_one_period(instance: DiscreteInstance):
    """Independent brute-force oracle for one-period instances.

    Scans every action triple (market target, bid-side fill target, ask-side
    fill target) on the grid and evaluates the closed-form expectation over
    the ten outcomes directly through the utility, with no shared machinery
    with the backward induction.  Returns ``((market, buy_target, sell_target),
    value)``; ties prefer smaller exposures.
    """
    if instance.n_periods != 1:
        raise ValueError("enumerate_one_period requires n_periods = 1")
    g = instance.position_grid
    eps = instance.half_spread
    kap = instance.impact_fraction
    q1, q2 = instance.fill_prob_sell, instance.fill_prob_buy
    u = instance.up_factor
    x0 = instance.initial_cash
    spec = instance.utility
    moves = (u - 1.0, 1.0 - u)
    order = [g[i] for i in _zero_first_order(g)]
    best_val = -math.inf
    best_action = None
    for a in order:
        cost = eps * abs(a - 0.0)
        for b in order:
            for cc in order:
                val = 0.0
                for mvz in moves:
                    base = x0 - cost + a * mvz
                    # no fill
                    val += 0.5 * (1 - q1) * (1 - q2) * float(
                        utility_value(spec, base - eps * abs(a)))
                    # sell arrival only
                    m1v = max(b, a)
                    w = base + eps * (m1v - a) - kap * eps * m1v
                    val += 0.5 * q1 * (1 - q2) * float(
                        utility_value(spec, w - eps * abs(m1v)))
                    # buy arrival only
                    m2v = min(cc, a)
                    w = base + eps * (a - m2v) + kap * eps * m2v
                    val += 0.5 * (1 - q1) * q2 * float(
                        utility_value(spec, w - eps * abs(m2v)))
                    # both, sell first
                    j1 = max(b, a)
                    j2 = min(j1, cc)
                    w = base + eps * (j1 - a) - kap * eps * j1 \
                        + eps * (j1 - j2) + kap * eps * j2
                    val += 0.25 * q1 * q2 * float(
                        utility_value(spec, w - eps * abs(j2)))
                    # both, buy first
                    k2 = min(cc, a)
                    k1 = max(k2, b)
                    w = base + eps * (a - k2) + kap * eps * k2 \
                        + eps * (k1 - k2) - kap * eps * k1
                    val += 0.25 * q1 * q2 * float(
                        utility_value(spec, w - eps * abs(k1)))
                if best_action is None or \
                        val > best_val + 1e-15 * max(1.0, abs(best_val)):
                    best_val = val
                    best_action = (a, b, cc)
    return best_action, best_val


# -- JSON fixtures -------------------------------------------------------------

def instance_to_json(instance: DiscreteInstance) -> str:
    """Serialize an instance (exponential utilities only)."""
    if instance.utility.kind != "exponential":
        raise ValueError("only exponential-utility instances serialize to JSON")
    payload = {
        "n_periods": instance.n_periods,
        "up_factor": instance.up_factor,
        "fill_prob_sell": instance.fill_prob_sell,
        "fill_prob_buy": instance.fill_prob_buy,
        "half_spread": instance.half_spread,
        "impact_fraction": instance.impact_fraction,
        "grid_step": instance.grid_step,
        "grid_bound": instance.grid_bound,
        "dt": instance.dt,
        "initial_cash": instance.initial_cash,
        "utility": {"kind": "exponential",
                    "risk_aversion": instance.utility.risk_aversion},
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def instance_from_json(text: str) -> DiscreteInstance:
    payload = json.loads(text)
    util = payload.pop("utility")
    if util.get("kind") != "exponential":
        raise ValueError("only exponential-utility instances load from JSON")
    return DiscreteInstance(utility=exponential_utility(util["risk_aversion"]),
                            **payload)


def result_to_json(result: DPResult) -> str:
    payload = {
        "optimal_value": result.optimal_value,
        "candidate_value": result.candidate_value,
        "gap": result.gap,
        "refinement_value_bound": result.refinement_value_bound,
        "wealth_bucket_width": result.wealth_bucket_width,
        "position_grid": result.position_grid.tolist(),
        "policy": {
            "market_target": result.policy_market_target.tolist(),
            "fill_target_buy": result.policy_fill_target_buy.tolist(),
            "fill_target_sell": result.policy_fill_target_sell.tolist(),
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True)
