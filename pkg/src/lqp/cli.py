"""Configuration loading, experiment orchestration, and CSV/JSON emission.

Config files are JSON with three sections::

    {
      "market":  {"volatility": 1.0, "spread_factor": 1.0,
                  "sell_rate": 1.0, "buy_rate": 1.0,
                  "spread_scale": 0.01, "intensity_exponent": 0.5,
                  "impact_fraction": 0.0, "horizon": 1.0,
                  "initial_price": 100.0, "initial_cash": 0.0},
      "utility": {"kind": "exponential", "risk_aversion": 1.0},
      "run":     {"seed": 1, "paths": 1000, "n_steps": 2048,
                  "eps_ladder": [0.04, 0.02, 0.01, 0.005],
                  "kappa_ladder": [0.0, 0.25, 0.5, 0.75],
                  "delta": 0.5, "oracle_periods": 6, "oracle_grid_step": null}
    }

Coefficient entries are numbers, ``{"kind": "piecewise", "times": [...],
"values": [...]}``, or ``{"kind": "ushape", "base": a, "curvature": b}``.
Numeric CSV cells are written with 12 significant digits and round-trip
through ``float``.  Reruns with an identical manifest produce byte-identical
outputs regardless of the worker count (``LQP_THREADS``).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .accounting import evolve_portfolio
from .coefficients import coefficient_from_spec
from .evaluation import (convergence_study, mc_expected_utility,
                         occupation_study, welfare_formula_ce)
from .market import (ConfigError, ModelConfig, build_time_grid,
                     simulate_market_path, validate_config)
from .oracle import discretize_instance, dp_optimal_utility, instance_to_json, result_to_json
from .policy import candidate_strategy, impact_policy, trading_boundaries
from .utility import (certainty_equivalent, exponential_utility,
                      marginal_utility, utility_value)

__all__ = ["RunManifest", "parse_config", "run_subcommand", "main"]

SUBCOMMANDS = ("simulate", "converge", "welfare", "occupation", "oracle", "impact-study")

_MARKET_FIELDS = {
    "volatility", "spread_factor", "sell_rate", "buy_rate", "spread_scale",
    "intensity_exponent", "impact_fraction", "horizon", "initial_price",
    "initial_cash",
}
_COEFFICIENT_FIELDS = ("volatility", "spread_factor", "sell_rate", "buy_rate")


@dataclass
class RunManifest:
    """Everything needed to reproduce one invocation, plus the digests of the
    files it emitted."""

    subcommand: str
    config_path: str
    seed: int
    n_paths: int
    n_steps: int
    out_dir: str
    eps_ladder: List[float]
    kappa_ladder: List[float]
    delta: float = 0.5
    oracle_periods: int = 6
    oracle_grid_step: Optional[float] = None
    outputs: List[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def parse_config(path) -> ModelConfig:
    """Load and validate a model configuration file.

    Raises :class:`ConfigError` naming the offending field on schema or
    bound violations.
    """
    config, _ = _load_config_file(path)
    return config


def _load_config_file(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    market = raw.get("market")
    if not isinstance(market, dict):
        raise ConfigError("config must contain a 'market' section")
    unknown = set(market) - _MARKET_FIELDS
    if unknown:
        raise ConfigError(f"unknown market field(s): {sorted(unknown)}")
    kwargs = {}
    horizon = market.get("horizon", 1.0)
    for name in _COEFFICIENT_FIELDS:
        if name in market:
            try:
                kwargs[name] = coefficient_from_spec(market[name], float(horizon))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"market.{name}: {exc}") from exc
    for name in _MARKET_FIELDS - set(_COEFFICIENT_FIELDS):
        if name in market:
            try:
                kwargs[name] = float(market[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"market.{name} must be a number") from exc
    util = raw.get("utility", {"kind": "exponential", "risk_aversion": 1.0})
    kind = util.get("kind", "exponential")
    if kind != "exponential":
        raise ConfigError("utility.kind: only 'exponential' is supported in config "
                          "files; custom utilities are library-only")
    try:
        utility = exponential_utility(float(util.get("risk_aversion", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"utility.risk_aversion: {exc}") from exc
    try:
        config = ModelConfig(utility=utility, **kwargs)
    except ConfigError as exc:
        raise ConfigError(_prefix_field(str(exc))) from exc
    validate_config(config)
    run = raw.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("'run' section must be an object")
    return config, run


def _prefix_field(msg: str) -> str:
    for name in _MARKET_FIELDS:
        if msg.startswith(name):
            return "market." + msg
    return msg


# -- CSV / digest helpers ------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_csv(path: Path, header: Sequence[str], rows, footer: Optional[str] = None):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    if footer is not None:
        lines.append(footer)
    path.write_text("\n".join(lines) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit(manifest: RunManifest, path: Path):
    manifest.outputs.append({"file": path.name, "sha256": _digest(path)})


# -- subcommand implementations -------------------------------------------------

def _run_simulate(manifest: RunManifest, config: ModelConfig, out: Path):
    grid = build_time_grid(config.horizon, manifest.n_steps)
    summary_rows = []
    for i in range(manifest.n_paths):
        path = simulate_market_path(config, grid, manifest.seed, i)
        if config.impact_fraction > 0:
            strat, stop_time = impact_policy(path, config)
        else:
            strat, stop_time = candidate_strategy(path, config), None
        ledger = evolve_portfolio(strat, path, config, record_trades=True)
        rows = [(t.time, t.kind, t.units, t.price, t.cash_after, t.units_after)
                for t in ledger.trades]
        fname = out / f"trades_path{i:04d}.csv"
        _write_csv(fname, ["time", "kind", "units", "price", "cash_after", "units_after"],
                   rows)
        _emit(manifest, fname)
        wealth = float(ledger.liquidation_wealth[-1])
        summary_rows.append((
            i, len(strat.fills), float(ledger.cash[-1]), float(ledger.units[-1]),
            wealth, float(utility_value(config.utility, wealth)),
            -1.0 if stop_time is None else stop_time,
        ))
    fname = out / "summary.csv"
    _write_csv(fname, ["path", "n_fills", "terminal_cash", "terminal_units",
                       "liquidation_wealth", "utility", "stop_time"], summary_rows)
    _emit(manifest, fname)


def _run_converge(manifest: RunManifest, config: ModelConfig, out: Path):
    study = convergence_study(config, manifest.eps_ladder, manifest.n_paths,
                              manifest.seed, manifest.n_steps)
    rows = [(r.epsilon, r.ce_mc.mean, r.ce_mc.std_error, r.ce_formula, r.ratio)
            for r in study.rows]
    footer = f"slope,{_fmt(study.slope)}" if study.slope_defined else "slope,nan"
    fname = out / "convergence.csv"
    _write_csv(fname, ["epsilon", "ce_mc", "ce_se", "ce_formula", "ratio"], rows,
               footer=footer)
    _emit(manifest, fname)


def _run_welfare(manifest: RunManifest, config: ModelConfig, out: Path):
    policy = "impact" if config.impact_fraction > 0 else "candidate"
    est = mc_expected_utility(config, policy, manifest.n_paths, manifest.seed,
                              manifest.n_steps)
    ce = certainty_equivalent(config.utility, est.mean)
    se = est.std_error / abs(float(marginal_utility(config.utility, ce)))
    formula = welfare_formula_ce(config, seed=manifest.seed)
    fname = out / "welfare.csv"
    _write_csv(fname, ["epsilon", "ce_formula", "ce_mc", "ce_mc_se", "abs_diff"],
               [(config.spread_scale, formula, ce, se, abs(ce - formula))])
    _emit(manifest, fname)


def _run_occupation(manifest: RunManifest, config: ModelConfig, out: Path):
    rows = occupation_study(config, manifest.eps_ladder, manifest.delta,
                            manifest.n_paths, manifest.seed, manifest.n_steps)
    fname = out / "occupation.csv"
    _write_csv(fname, ["epsilon", "delta", "mean_occupation", "std_error", "n_paths_used"],
               [(r.epsilon, r.delta, r.mean, r.std_error, r.n_paths_used) for r in rows])
    _emit(manifest, fname)


def _run_oracle(manifest: RunManifest, config: ModelConfig, out: Path):
    step = manifest.oracle_grid_step
    if step is None:
        b = trading_boundaries(0.0, config)
        ref = max(abs(b.upper), abs(b.lower))
        step = ref / 8.0 if ref > 0 else 0.1
    instance = discretize_instance(config, manifest.oracle_periods, step)
    result = dp_optimal_utility(instance)
    fname = out / "dp_instance.json"
    fname.write_text(instance_to_json(instance) + "\n")
    _emit(manifest, fname)
    fname = out / "dp_result.json"
    fname.write_text(result_to_json(result) + "\n")
    _emit(manifest, fname)


def _run_impact_study(manifest: RunManifest, config: ModelConfig, out: Path):
    rows = []
    for kappa in manifest.kappa_ladder:
        cfg = dataclasses.replace(config, impact_fraction=float(kappa))
        b = trading_boundaries(0.0, cfg)
        formula = welfare_formula_ce(cfg, seed=manifest.seed)
        if kappa > 0:
            est, samples = mc_expected_utility(cfg, "impact", manifest.n_paths,
                                               manifest.seed, manifest.n_steps,
                                               return_samples=True)
            stop_prob = _stop_probability(cfg, manifest)
        else:
            est = mc_expected_utility(cfg, "candidate", manifest.n_paths,
                                      manifest.seed, manifest.n_steps)
            stop_prob = 0.0
        ce = certainty_equivalent(cfg.utility, est.mean)
        se = est.std_error / abs(float(marginal_utility(cfg.utility, ce)))
        rows.append((kappa, b.upper, b.lower, formula, ce, se, stop_prob))
    fname = out / "impact_study.csv"
    _write_csv(fname, ["kappa", "upper", "lower", "ce_formula", "ce_mc", "ce_mc_se",
                       "stop_probability"], rows)
    _emit(manifest, fname)


def _stop_probability(config: ModelConfig, manifest: RunManifest) -> float:
    grid = build_time_grid(config.horizon, manifest.n_steps)
    stops = 0
    for i in range(manifest.n_paths):
        path = simulate_market_path(config, grid, manifest.seed, i)
        _, stop_time = impact_policy(path, config)
        stops += stop_time is not None
    return stops / manifest.n_paths


_RUNNERS = {
    "simulate": _run_simulate,
    "converge": _run_converge,
    "welfare": _run_welfare,
    "occupation": _run_occupation,
    "oracle": _run_oracle,
    "impact-study": _run_impact_study,
}


def run_subcommand(manifest: RunManifest) -> int:
    """Execute one subcommand, writing its outputs and the manifest into the
    output directory.  Returns the process exit status."""
    if manifest.subcommand not in _RUNNERS:
        print(f"unknown subcommand {manifest.subcommand!r}", file=sys.stderr)
        return 2
    try:
        config, _ = _load_config_file(manifest.config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(manifest.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _RUNNERS[manifest.subcommand](manifest, config, out)
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 1
    return 0


def _parse_ladder(text: Optional[str], fallback):
    if text is None:
        return list(fallback)
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad ladder {text!r}: {exc}") from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lqp",
        description="Limit-order-market liquidity provision experiments")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--paths", type=int, default=None)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--out", default="lqp-out")
    parser.add_argument("--eps-ladder", default=None,
                        help="comma-separated spread scales")
    parser.add_argument("--kappa-ladder", default=None,
                        help="comma-separated impact fractions")
    args = parser.parse_args(argv)
    try:
        _, run = _load_config_file(args.config)
        manifest = RunManifest(
            subcommand=args.subcommand,
            config_path=str(args.config),
            seed=args.seed if args.seed is not None else int(run.get("seed", 1)),
            n_paths=args.paths if args.paths is not None else int(run.get("paths", 256)),
            n_steps=args.steps if args.steps is not None else int(run.get("n_steps", 2048)),
            out_dir=str(args.out),
            eps_ladder=_parse_ladder(args.eps_ladder,
                                     run.get("eps_ladder", [0.04, 0.02, 0.01, 0.005])),
            kappa_ladder=_parse_ladder(args.kappa_ladder,
                                       run.get("kappa_ladder", [0.0, 0.25, 0.5, 0.75])),
            delta=float(run.get("delta", 0.5)),
            oracle_periods=int(run.get("oracle_periods", 6)),
            oracle_grid_step=(float(run["oracle_grid_step"])
                              if run.get("oracle_grid_step") is not None else None),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run_subcommand(manifest)


if __name__ == "__main__":
    sys.exit(main())
