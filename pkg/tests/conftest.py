"""Shared fixtures and helpers for the test suite.

Built lookup tables are cached on disk under tests/_cache keyed by the
config hash, quadrature digest and correction mode, so repeated runs and
tests sharing an instance do not rebuild.
"""

import copy
from pathlib import Path

import pytest

from egnopt.config import config_from_dict
from egnopt.quadrature import QuadratureSpec
from egnopt.tables import TableCacheError, build_tables, load_tables, save_tables

CACHE_DIR = Path(__file__).parent / "_cache"

TABLE1 = {
    "fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 16.75,
              "gamma_w_km": 1.31, "span_km": 120.0, "spans": 40},
    "grid": {"f0_thz": 193.0, "delta_f_ghz": 50.0, "channels": 30,
             "baud_gbd": 27.5},
    "modulation": {"name": "pm-qpsk", "snr_req_db": 8.45},
    "amplifier": {"n_sp": 1.77},
    "model": {"mode": "egn"},
}


def table1_config(mode="egn", channels=30, spacing_ghz=50.0, spans=40,
                  **mod_overrides):
    doc = copy.deepcopy(TABLE1)
    doc["model"]["mode"] = mode
    doc["grid"]["channels"] = channels
    doc["grid"]["delta_f_ghz"] = spacing_ghz
    doc["fiber"]["spans"] = spans
    doc["modulation"].update(mod_overrides)
    return config_from_dict(doc)


def toy_config(mode="egn", channels=2, spans=1, span_km=100.0,
               spacing_ghz=50.0, **mod_overrides):
    doc = copy.deepcopy(TABLE1)
    doc["model"]["mode"] = mode
    doc["grid"]["channels"] = channels
    doc["grid"]["delta_f_ghz"] = spacing_ghz
    doc["fiber"]["spans"] = spans
    doc["fiber"]["span_km"] = span_km
    doc["modulation"].update(mod_overrides)
    return config_from_dict(doc)


def build_cached(cfg, q=None, corrections="full"):
    """Build tables, memoized on disk across test runs."""
    q = q or QuadratureSpec()
    CACHE_DIR.mkdir(exist_ok=True)
    key = f"{cfg.grid_hash():016x}-{q.digest():016x}-{corrections}.nlit"
    path = CACHE_DIR / key
    if path.exists():
        try:
            return load_tables(path, cfg)
        except TableCacheError:
            path.unlink()
    tables = build_tables(cfg, q, corrections=corrections, workers=1)
    save_tables(tables, path)
    return tables


@pytest.fixture(scope="session")
def quad():
    return QuadratureSpec()


@pytest.fixture(scope="session")
def small_gn_tables():
    cfg = toy_config("gn", channels=3, spans=4)
    return cfg, build_cached(cfg)


@pytest.fixture(scope="session")
def small_egn_tables():
    cfg = toy_config("egn", channels=3, spans=4)
    return cfg, build_cached(cfg)
