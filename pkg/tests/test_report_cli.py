"""Sweep reporting, CSV/plot emission, and the command-line interface."""

import csv
import math

import numpy as np
import pytest

import mmrelay.cli as cli
from mmrelay.config import SystemConfig, save_config
from mmrelay.exceptions import NumericError
from mmrelay.report import (CSV_HEADER, NATS_TO_BITS, SweepResult, SweepRow,
                            emit_csv, emit_plot, run_quadratic_form_sweep,
                            run_sweep)
from mmrelay.verify import GapReport


def _small_cfg(**kw):
    base = dict(M=32, K=4, P_watts=1.0, trials=4, seed=0)
    base.update(kw)
    return SystemConfig(**base)


def test_run_sweep_single_point():
    res = run_sweep(_small_cfg(), power_grid_dbm=[30.0])
    assert len(res.rows) == 1
    assert res.rows[0].p_dbm == 30.0
    assert res.seed == 0 and len(res.fingerprint) == 16


def test_rows_sorted_by_power():
    rows = (SweepRow(20.0, 1, 0, 1, 1, 0, 1), SweepRow(-10.0, 1, 0, 1, 1, 0, 1))
    res = SweepResult(rows=rows, fingerprint="x", seed=0)
    assert [r.p_dbm for r in res.rows] == [-10.0, 20.0]


def test_csv_header_and_round_trip(tmp_path):
    res = run_sweep(_small_cfg(), power_grid_dbm=[10.0, 30.0])
    path = tmp_path / "out.csv"
    emit_csv(res, path)
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == CSV_HEADER
    assert ",".join(CSV_HEADER) == ("p_dbm,sumrate_mc_af,stderr_af,sumrate_de_af,"
                                    "sumrate_mc_df,stderr_df,sumrate_de_df")
    # values are the engine's nats converted to bits
    assert float(rows[1][1]) == pytest.approx(res.rows[1].sumrate_mc_af * NATS_TO_BITS,
                                              rel=1e-9)


def test_empty_result_header_only(tmp_path):
    res = SweepResult(rows=(), fingerprint="x", seed=0)
    path = tmp_path / "empty.csv"
    emit_csv(res, path)
    assert path.read_text().strip() == ",".join(CSV_HEADER)


def test_csv_byte_identical_across_runs_and_workers(tmp_path):
    cfg = _small_cfg(seed=11)
    paths = []
    for i, workers in enumerate((1, 3)):
        res = run_sweep(cfg, power_grid_dbm=[20.0, 40.0], workers=workers)
        p = tmp_path / f"run{i}.csv"
        emit_csv(res, p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_emit_plot_writes_svg(tmp_path):
    res = run_sweep(_small_cfg(), power_grid_dbm=[10.0, 30.0])
    path = tmp_path / "fig.svg"
    emit_plot(res, path, title="check")
    body = path.read_text()
    assert body.lstrip().startswith("<?xml")
    assert "transmit power (dBm)" in body
    assert "sum rate (bit/s/Hz)" in body


def test_quadratic_form_sweep_rows():
    cfg = _small_cfg(tau_sr=0.0)
    rows = run_quadratic_form_sweep(cfg, power_grid_dbm=[0.0, 30.0], trials=3)
    assert [r.p_dbm for r in rows] == [0.0, 30.0]
    for r in rows:
        # identity correlation: closed form is 1/(1 + alpha)
        alpha = cfg.alphas_at(10 ** ((r.p_dbm - 30) / 10))[0]
        assert r.de_closed_form == pytest.approx(1 / (1 + alpha), rel=1e-9)
        assert r.realized_mean == pytest.approx(r.de_iterative, rel=0.05)


def test_cli_sweep_outputs(tmp_path):
    rc = cli.main(["sweep", "--preset", "fig5b", "--trials", "3",
                   "--grid", "20,35", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "fig5b_sweep.csv").exists()
    assert (tmp_path / "fig5b_sweep.svg").exists()


def test_cli_sweep_from_config_file(tmp_path):
    cfg_path = tmp_path / "scenario.json"
    save_config(_small_cfg(), cfg_path)
    rc = cli.main(["sweep", "--config", str(cfg_path), "--grid", "30",
                   "--format", "csv", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "scenario_sweep.csv").exists()
    assert not (tmp_path / "scenario_sweep.svg").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    rc = cli.main(["sweep", "--config", str(tmp_path / "missing.json")])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_bad_format_rejected(tmp_path):
    rc = cli.main(["sweep", "--preset", "fig5b", "--grid", "30",
                   "--format", "pdf", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_numeric_error_exit_code(monkeypatch, tmp_path, capsys):
    def boom(*a, **kw):
        raise NumericError("forced")
    monkeypatch.setattr(cli.rpt, "run_sweep", boom)
    rc = cli.main(["sweep", "--preset", "fig5b", "--out", str(tmp_path)])
    assert rc == 3
    assert "numeric error" in capsys.readouterr().err


def test_cli_verify_filter_and_csv(tmp_path, capsys):
    out = tmp_path / "gaps.csv"
    rc = cli.main(["verify", "--only", "lemma1", "--ladder", "32,64",
                   "--out", str(out)])
    assert rc == 0
    assert "lemma1_identity" in capsys.readouterr().out
    with open(out) as fh:
        header = next(csv.reader(fh))
    assert header[0] == "statistic"


def test_cli_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli.vf, "run_verification",
                        lambda **kw: (False, ["tau misconfigured"], []))
    rc = cli.main(["verify"])
    assert rc == 4
    assert "tau misconfigured" in capsys.readouterr().err


def test_cli_quadform(tmp_path):
    rc = cli.main(["quadform", "--preset", "fig7b", "--trials", "2",
                   "--grid", "25,40", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "fig7b_quadform.csv").exists()
    assert (tmp_path / "fig7b_quadform.svg").exists()
