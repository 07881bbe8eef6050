import json
from pathlib import Path

import pytest

from lqp import ConfigError
from lqp.cli import RunManifest, main, parse_config, run_subcommand


def _write_config(tmp_path, market=None, utility=None, run=None):
    cfg = {
        "market": {"volatility": 1.0, "spread_factor": 1.0, "sell_rate": 1.0,
                   "buy_rate": 1.0, "spread_scale": 0.02,
                   "intensity_exponent": 0.5, "impact_fraction": 0.0,
                   "horizon": 1.0, "initial_price": 100.0, "initial_cash": 0.0},
        "utility": {"kind": "exponential", "risk_aversion": 1.0},
        "run": {"seed": 3, "paths": 16, "n_steps": 128,
                "eps_ladder": [0.08, 0.04, 0.02], "kappa_ladder": [0.0, 0.5]},
    }
    if market:
        cfg["market"].update(market)
    if utility:
        cfg["utility"].update(utility)
    if run:
        cfg["run"].update(run)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_parse_minimal_constant_config(tmp_path):
    cfg = parse_config(_write_config(tmp_path))
    assert cfg.spread_scale == 0.02
    assert cfg.volatility(0.3) == 1.0
    assert cfg.all_constant


def test_parse_piecewise_and_ushape_coefficients(tmp_path):
    path = _write_config(tmp_path, market={
        "volatility": {"kind": "ushape", "base": 0.8, "curvature": 0.4},
        "sell_rate": {"kind": "piecewise", "times": [0.0, 0.5], "values": [1.0, 2.0]},
    })
    cfg = parse_config(path)
    assert cfg.volatility(0.0) == pytest.approx(1.2)
    assert cfg.volatility(0.5) == pytest.approx(0.8)
    assert cfg.sell_rate(0.75) == pytest.approx(2.0)
    assert not cfg.all_constant


def test_parse_rejects_bad_intensity_exponent(tmp_path):
    path = _write_config(tmp_path, market={"intensity_exponent": 1.2})
    with pytest.raises(ConfigError, match="intensity_exponent.*\\(0, 1\\)"):
        parse_config(path)


def test_parse_rejects_unit_impact(tmp_path):
    path = _write_config(tmp_path, market={"impact_fraction": 1.0})
    with pytest.raises(ConfigError, match="impact_fraction"):
        parse_config(path)


def test_parse_rejects_wide_spread(tmp_path):
    path = _write_config(tmp_path, market={"spread_scale": 0.6, "spread_factor": 2.0})
    with pytest.raises(ConfigError, match="spread"):
        parse_config(path)


def test_parse_rejects_unknown_field(tmp_path):
    path = _write_config(tmp_path, market={"vol": 1.0})
    with pytest.raises(ConfigError, match="vol"):
        parse_config(path)


def _run(tmp_path, subcommand, out_name, **overrides):
    config_path = _write_config(tmp_path, **overrides.pop("config", {}))
    manifest = RunManifest(
        subcommand=subcommand, config_path=str(config_path), seed=3,
        n_paths=overrides.pop("n_paths", 12), n_steps=overrides.pop("n_steps", 128),
        out_dir=str(tmp_path / out_name),
        eps_ladder=overrides.pop("eps_ladder", [0.08, 0.04, 0.02]),
        kappa_ladder=overrides.pop("kappa_ladder", [0.0, 0.5]),
        **overrides)
    status = run_subcommand(manifest)
    return status, Path(manifest.out_dir), manifest


def test_simulate_outputs_and_manifest(tmp_path):
    status, out, manifest = _run(tmp_path, "simulate", "sim", n_paths=3)
    assert status == 0
    assert (out / "summary.csv").exists()
    assert (out / "trades_path0000.csv").exists()
    listed = json.loads((out / "manifest.json").read_text())
    assert len(listed["outputs"]) == 4
    header = (out / "trades_path0000.csv").read_text().splitlines()[0]
    assert header == "time,kind,units,price,cash_after,units_after"


def test_csv_cells_round_trip_at_12_digits(tmp_path):
    status, out, _ = _run(tmp_path, "converge", "conv", n_paths=40)
    assert status == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    for line in lines[1:]:
        cells = line.split(",")
        if cells[0] == "slope":
            cells = cells[1:]
        for cell in cells:
            val = float(cell)
            assert f"{val:.12g}" == cell


def test_rerun_produces_identical_digests(tmp_path):
    _, out_a, man_a = _run(tmp_path, "converge", "a", n_paths=30)
    _, out_b, man_b = _run(tmp_path, "converge", "b", n_paths=30)
    assert [o["sha256"] for o in man_a.outputs] == [o["sha256"] for o in man_b.outputs]


def test_worker_count_does_not_change_digests(tmp_path, monkeypatch):
    monkeypatch.setenv("LQP_THREADS", "2")
    _, _, man_a = _run(tmp_path, "converge", "w2", n_paths=30)
    monkeypatch.setenv("LQP_THREADS", "1")
    _, _, man_b = _run(tmp_path, "converge", "w1", n_paths=30)
    assert [o["sha256"] for o in man_a.outputs] == [o["sha256"] for o in man_b.outputs]


def test_welfare_subcommand(tmp_path):
    status, out, _ = _run(tmp_path, "welfare", "welf", n_paths=50)
    assert status == 0
    rows = (out / "welfare.csv").read_text().splitlines()
    header = rows[0].split(",")
    values = dict(zip(header, rows[1].split(",")))
    assert float(values["ce_formula"]) == pytest.approx(2 * 0.02, rel=1e-9)


def test_occupation_subcommand(tmp_path):
    status, out, _ = _run(tmp_path, "occupation", "occ", n_paths=20,
                          eps_ladder=[0.04, 0.02])
    assert status == 0
    lines = (out / "occupation.csv").read_text().splitlines()
    assert len(lines) == 3


def test_oracle_subcommand(tmp_path):
    status, out, _ = _run(tmp_path, "oracle", "orc", oracle_periods=3)
    assert status == 0
    result = json.loads((out / "dp_result.json").read_text())
    assert result["gap"] >= -1e-12
    inst = json.loads((out / "dp_instance.json").read_text())
    assert inst["n_periods"] == 3


def test_impact_study_boundaries_scale(tmp_path):
    status, out, _ = _run(tmp_path, "impact-study", "imp", n_paths=40,
                          kappa_ladder=[0.0, 0.25, 0.5, 0.75])
    assert status == 0
    lines = (out / "impact_study.csv").read_text().splitlines()
    rows = [dict(zip(lines[0].split(","), ln.split(","))) for ln in lines[1:]]
    base = float(rows[0]["upper"])
    for row in rows:
        kappa = float(row["kappa"])
        assert float(row["upper"]) == pytest.approx((1 - kappa) * base, rel=1e-12)


def test_main_cli_entry(tmp_path, capsys):
    config_path = _write_config(tmp_path)
    out = tmp_path / "cli-out"
    status = main(["welfare", "--config", str(config_path), "--paths", "16",
                   "--steps", "64", "--out", str(out)])
    assert status == 0
    assert (out / "welfare.csv").exists()


def test_main_reports_config_errors(tmp_path, capsys):
    config_path = _write_config(tmp_path, market={"intensity_exponent": 1.2})
    status = main(["welfare", "--config", str(config_path)])
    assert status == 2
    assert "intensity_exponent" in capsys.readouterr().err


def test_unknown_subcommand_rejected(tmp_path):
    config_path = _write_config(tmp_path)
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", str(config_path)])
