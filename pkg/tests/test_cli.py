import copy
import csv
import json

import numpy as np
import pytest

from egnopt.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from tests.conftest import TABLE1


def _write_config(path, mode="gn", channels=2, spans=1, span_km=100.0):
    doc = copy.deepcopy(TABLE1)
    doc["model"]["mode"] = mode
    doc["grid"]["channels"] = channels
    doc["fiber"]["spans"] = spans
    doc["fiber"]["span_km"] = span_km
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = _write_config(root / "link.json")
    tables_path = root / "tables.nlit"
    code = main(["--config", str(cfg_path), "--tables", str(tables_path),
                 "--out", str(root), "tables"])
    assert code == EXIT_OK
    return root, cfg_path, tables_path


def test_tables_outputs_and_manifest(workspace):
    root, cfg_path, tables_path = workspace
    assert tables_path.exists()
    manifest = json.loads(tables_path.with_suffix(".manifest.json").read_text())
    assert manifest["tool"] == "egnopt"
    assert manifest["command"] == "tables"
    assert manifest["config_path"] == str(cfg_path)
    assert "tables_hash" in manifest


def test_tables_rebuild_is_byte_identical(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    other = tmp_path / "again.nlit"
    code = main(["--config", str(cfg_path), "--tables", str(other),
                 "--out", str(tmp_path), "tables"])
    assert code == EXIT_OK
    assert other.read_bytes() == tables_path.read_bytes()


def test_optimize_margin(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    code = main(["--config", str(cfg_path), "--tables", str(tables_path),
                 "--out", str(tmp_path), "optimize", "--objective", "margin"])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "solution.json").read_text())
    assert report["objective"] == "margin"
    assert report["converged"] is True
    assert len(report["allocation_dbm"]) == 2
    assert report["model_mode"] == "gn"
    with open(tmp_path / "budget.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "channel"
    assert len(rows) == 3


def test_optimize_rate_and_flat(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    for extra in (["--objective", "rate"], ["--objective", "margin", "--flat"]):
        out = tmp_path / extra[-1].lstrip("-")
        code = main(["--config", str(cfg_path), "--tables", str(tables_path),
                     "--out", str(out), "optimize"] + extra)
        assert code == EXIT_OK
        report = json.loads((out / "solution.json").read_text())
        assert report["converged"] is True


def test_sweep_with_input_snr_ceiling(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    code = main(["--config", str(cfg_path), "--tables", str(tables_path),
                 "--out", str(tmp_path), "sweep",
                 "--power-range=-10:0:1", "--input-snr", "16.7"])
    assert code == EXIT_OK
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["power_dbm", "channel", "snr_db",
                       "snr_with_tx_noise_db", "ber"]
    assert len(rows) == 1 + 11 * 2
    snr = np.array([float(r[2]) for r in rows[1:]])
    capped = np.array([float(r[3]) for r in rows[1:]])
    assert np.all(capped < 16.7)
    assert np.all(capped <= snr + 1e-12)


def test_sweep_rejects_bad_range(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    code = main(["--config", str(cfg_path), "--tables", str(tables_path),
                 "--out", str(tmp_path), "sweep", "--power-range", "5:-5:1"])
    assert code == EXIT_VALIDATION


def test_missing_config_is_validation_error(tmp_path):
    code = main(["--config", str(tmp_path / "nope.json"), "tables"])
    assert code == EXIT_VALIDATION


def test_bad_json_config_is_validation_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["--config", str(bad), "tables"])
    assert code == EXIT_VALIDATION


def test_corrupt_tables_is_validation_error(workspace, tmp_path):
    _, cfg_path, tables_path = workspace
    blob = bytearray(tables_path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    broken = tmp_path / "broken.nlit"
    broken.write_bytes(bytes(blob))
    code = main(["--config", str(cfg_path), "--tables", str(broken),
                 "--out", str(tmp_path), "optimize"])
    assert code == EXIT_VALIDATION


def test_optimize_without_tables_is_validation_error(workspace, tmp_path):
    _, cfg_path, _ = workspace
    code = main(["--config", str(cfg_path), "--out", str(tmp_path), "optimize"])
    assert code == EXIT_VALIDATION


def test_compare_models(workspace, tmp_path):
    _, cfg_path, _ = workspace
    code = main(["--config", str(cfg_path), "--out", str(tmp_path),
                 "compare", "--models", "egn,gn"])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "compare.json").read_text())
    assert report["models"] == ["egn", "gn"]
    deltas = report["deltas"]
    for key in ("optimal_power_gap_db", "flat_snr_gap_db",
                "rate_gap_bits_per_symbol"):
        assert key in deltas
    # QPSK sees less interference noise than the Gaussian baseline
    assert deltas["optimal_power_gap_db"] > 0
    assert deltas["flat_snr_gap_db"] > 0
    assert report["results"]["egn"]["converged"] is True


def test_compare_rejects_unknown_model(workspace, tmp_path):
    _, cfg_path, _ = workspace
    code = main(["--config", str(cfg_path), "--out", str(tmp_path),
                 "compare", "--models", "egn,foo"])
    assert code == EXIT_VALIDATION


@pytest.mark.parametrize("figure", ["fig3", "fig5", "fig6"])
def test_reproduce_figures(workspace, tmp_path, figure):
    _, cfg_path, _ = workspace
    out = tmp_path / figure
    code = main(["--config", str(cfg_path), "--out", str(out),
                 "reproduce", figure])
    assert code == EXIT_OK
    with open(out / f"{figure}.csv") as fh:
        rows = list(csv.reader(fh))
    if figure == "fig5":
        assert rows[0][0] == "model"
        assert [r[0] for r in rows[1:]] == ["egn", "gn"]
    else:
        assert rows[0][0] == "channel"
        assert len(rows) == 3
    manifest = json.loads((out / f"{figure}.manifest.json").read_text())
    assert manifest["settings"]["figure"] == figure


def test_reproduce_scale_cannot_exceed_channels(workspace, tmp_path):
    _, cfg_path, _ = workspace
    code = main(["--config", str(cfg_path), "--out", str(tmp_path),
                 "reproduce", "fig3", "--scale", "99"])
    assert code == EXIT_VALIDATION


def test_calibrate_reports_both_readings(workspace, tmp_path, capsys):
    _, cfg_path, _ = workspace
    code = main(["--config", str(cfg_path), "--out", str(tmp_path), "calibrate"])
    assert code == EXIT_OK
    captured = capsys.readouterr().out
    assert "F = n_sp" in captured
    assert "F = 2*n_sp" in captured
    payload = json.loads((tmp_path / "calibrate.json").read_text())
    vals = [e["p_ase_watt"] for e in payload["interpretations"]]
    assert vals[1] == pytest.approx(2.0 * vals[0], rel=1e-12)
