import numpy as np
import pytest

from egnopt.quadrature import QuadratureSpec, derive_seed
from egnopt.tables import (
    NliTableError,
    TableCacheError,
    _clamp_entry,
    build_tables,
    channel_band,
    load_tables,
    save_tables,
    sci_coefficient,
    xci_coefficients,
)
from tests.conftest import build_cached, toy_config


@pytest.fixture(scope="module")
def quad():
    return QuadratureSpec()


def test_channel_band_width(quad):
    cfg = toy_config(channels=3)
    lo, hi = channel_band(cfg, 2)
    assert hi - lo == pytest.approx(cfg.grid.symbol_rate)
    assert 0.5 * (lo + hi) == pytest.approx(float(cfg.grid.center_frequency(2)))


def test_gn_degeneracy_zero_moments(quad):
    egn = toy_config("egn", channels=3, spans=2, phi=0.0, psi=0.0)
    gn = toy_config("gn", channels=3, spans=2, phi=0.0, psi=0.0)
    te = build_tables(egn, quad, workers=1)
    tg = build_tables(gn, quad, workers=1)
    for name in ("d1", "d2", "d3", "d4"):
        assert np.array_equal(getattr(te, name), getattr(tg, name))


def test_gamma_square_scaling(quad):
    base = toy_config("gn", channels=2, spans=2)
    doubled_doc = {
        "fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 16.75,
                  "gamma_w_km": 2.62, "span_km": 100.0, "spans": 2},
        "grid": {"f0_thz": 193.0, "delta_f_ghz": 50.0, "channels": 2,
                 "baud_gbd": 27.5},
        "modulation": {"name": "pm-qpsk", "snr_req_db": 8.45},
        "amplifier": {"n_sp": 1.77},
        "model": {"mode": "gn"},
    }
    from egnopt.config import config_from_dict
    doubled = config_from_dict(doubled_doc)
    t1 = build_tables(base, quad, workers=1)
    t2 = build_tables(doubled, quad, workers=1)
    assert np.allclose(t2.d1, 4.0 * t1.d1, rtol=1e-10)
    assert np.allclose(t2.d2, 4.0 * t1.d2, rtol=1e-10)


def test_zero_gamma_gives_zero_tables(quad):
    from egnopt.config import config_from_dict
    doc = {
        "fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 16.75,
                  "gamma_w_km": 0.0, "span_km": 100.0, "spans": 2},
        "grid": {"f0_thz": 193.0, "delta_f_ghz": 50.0, "channels": 2,
                 "baud_gbd": 27.5},
        "modulation": {"name": "pm-qpsk", "snr_req_db": 8.45},
        "amplifier": {"n_sp": 1.77},
        "model": {"mode": "gn"},
    }
    t = build_tables(config_from_dict(doc), quad, workers=1)
    assert np.all(t.d1 == 0.0)
    assert np.all(t.d2 == 0.0)


def test_qpsk_correction_reduces_d1(small_egn_tables, small_gn_tables):
    (_, te), (_, tg) = small_egn_tables, small_gn_tables
    assert np.all(te.d1 < tg.d1)
    assert np.all(te.d2[te.d2 > 0] <= tg.d2[te.d2 > 0])


def test_uniform_grid_symmetry(small_gn_tables):
    _, t = small_gn_tables
    # equal separations share one representative computation
    assert t.d2[0, 1] == t.d2[1, 2] == t.d2[2, 1] == t.d2[1, 0]
    assert t.d2[0, 2] == t.d2[2, 0]
    assert np.all(t.d1 == t.d1[0])


def test_translation_invariance_of_pairs(quad):
    # independent per-pair computations at equal separation agree closely
    cfg = toy_config("gn", channels=4, spans=2)
    a, _ = xci_coefficients(1, 2, cfg, quad, seed=derive_seed(quad.base_seed, "t"))
    b, _ = xci_coefficients(3, 4, cfg, quad, seed=derive_seed(quad.base_seed, "t"))
    c, _ = xci_coefficients(2, 1, cfg, quad, seed=derive_seed(quad.base_seed, "t"))
    assert a[0] == pytest.approx(b[0], rel=1e-7)
    assert a[0] == pytest.approx(c[0], rel=1e-7)


def test_d2_decays_with_separation(quad):
    cfg = toy_config("gn", channels=10, spans=4)
    t = build_cached(cfg)
    row = t.d2[0]
    seps = np.arange(1, 10)
    vals = row[seps]
    assert np.all(np.diff(vals) < 0)


def test_sci_positive_and_reported_error_small(quad):
    cfg = toy_config("egn", channels=2, spans=2)
    val, err = sci_coefficient(1, cfg, quad)
    assert val > 0
    assert err < 0.05 * val


def test_far_pair_has_empty_d3_d4(quad):
    cfg = toy_config("gn", channels=4, spans=2)
    (d2, d3, d4), _ = xci_coefficients(1, 4, cfg, quad)
    assert d2 > 0
    assert d3 == 0.0
    assert d4 == 0.0


def test_single_channel_table(quad):
    cfg = toy_config("gn", channels=1, spans=2)
    t = build_tables(cfg, quad, workers=1)
    assert t.d1.shape == (1,)
    assert t.d2.shape == (1, 1)
    assert t.d1[0] > 0
    assert t.d2[0, 0] == 0.0


def test_build_deterministic(quad):
    cfg = toy_config("egn", channels=2, spans=2)
    a = build_tables(cfg, quad, workers=1)
    b = build_tables(cfg, quad, workers=1)
    for name in ("d1", "d2", "d3", "d4", "err_d1", "err_d2"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_seed_changes_corrections_only_slightly(quad):
    cfg = toy_config("egn", channels=2, spans=2)
    a = build_tables(cfg, quad, workers=1)
    b = build_tables(cfg, QuadratureSpec(base_seed=99), workers=1)
    assert not np.array_equal(a.d1, b.d1)  # QMC corrections re-sampled
    assert np.allclose(a.d1, b.d1, rtol=0.02)


def test_cache_roundtrip(tmp_path, small_gn_tables):
    cfg, t = small_gn_tables
    path = tmp_path / "t.nlit"
    save_tables(t, path)
    back = load_tables(path, cfg)
    for name in ("d1", "d2", "d3", "d4", "err_d1", "err_d2", "err_d3", "err_d4"):
        assert np.array_equal(getattr(t, name), getattr(back, name))
    assert back.metadata["model_mode"] == "gn"
    assert back.matches(cfg)


def test_cache_rejects_flipped_byte(tmp_path, small_gn_tables):
    cfg, t = small_gn_tables
    path = tmp_path / "t.nlit"
    save_tables(t, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(TableCacheError):
        load_tables(path)


def test_cache_rejects_wrong_config(tmp_path, small_gn_tables):
    cfg, t = small_gn_tables
    path = tmp_path / "t.nlit"
    save_tables(t, path)
    other = toy_config("gn", channels=4, spans=4)
    with pytest.raises(TableCacheError):
        load_tables(path, other)


def test_cache_rejects_truncation(tmp_path, small_gn_tables):
    _, t = small_gn_tables
    path = tmp_path / "t.nlit"
    save_tables(t, path)
    path.write_bytes(path.read_bytes()[:-20])
    with pytest.raises(TableCacheError):
        load_tables(path)


def test_clamp_entry_policy():
    assert _clamp_entry(1.0, 0.1, "x") == 1.0
    assert _clamp_entry(-0.1, 0.05, "x") == 0.0
    with pytest.raises(NliTableError):
        _clamp_entry(-1.0, 0.05, "x")
