import json

import numpy as np
import pytest

from egnopt.config import (
    AmplifierSpec,
    ChannelGrid,
    ConfigError,
    config_from_dict,
    load_config,
)
from tests.conftest import TABLE1, table1_config, toy_config


def test_center_frequencies_uniform():
    grid = ChannelGrid(f0=193e12, delta_f=50e9, num_channels=5, symbol_rate=27.5e9)
    freqs = grid.center_frequencies
    assert freqs[0] == pytest.approx(193e12 + 25e9)
    assert np.allclose(np.diff(freqs), 50e9)


def test_symbol_rate_cannot_exceed_spacing():
    with pytest.raises(ConfigError):
        ChannelGrid(f0=193e12, delta_f=25e9, num_channels=2, symbol_rate=27.5e9)


def test_modulation_lookup_by_name():
    cfg = table1_config()
    assert cfg.modulation.phi == pytest.approx(-1.0)
    assert cfg.modulation.psi == pytest.approx(4.0)
    assert cfg.modulation.snr_req == pytest.approx(10 ** 0.845)


def test_unknown_modulation_needs_explicit_moments():
    doc = json.loads(json.dumps(TABLE1))
    doc["modulation"]["name"] = "hexagonal-7"
    with pytest.raises(ConfigError):
        config_from_dict(doc)
    doc["modulation"]["phi"] = -0.5
    doc["modulation"]["psi"] = 1.0
    cfg = config_from_dict(doc)
    assert cfg.modulation.phi == -0.5


def test_unknown_keys_rejected():
    doc = json.loads(json.dumps(TABLE1))
    doc["grid"]["bandwidth_thz"] = 4.0
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_missing_section_rejected():
    doc = json.loads(json.dumps(TABLE1))
    del doc["amplifier"]
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_model_mode_validation():
    doc = json.loads(json.dumps(TABLE1))
    doc["model"]["mode"] = "ggn"
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_gn_mode_forces_zero_moments():
    cfg = table1_config("gn")
    assert cfg.effective_phi_psi(1) == (0.0, 0.0)
    assert cfg.modulation.phi == pytest.approx(-1.0)  # spec kept, kernel view zeroed


def test_noise_factor_interpretations():
    amp = AmplifierSpec.from_n_sp(1.77, 193e12)
    assert amp.noise_factor == pytest.approx(3.54)
    amp2 = AmplifierSpec.from_noise_figure(3.54, 193e12)
    assert amp2.n_sp == pytest.approx(1.77)


def test_grid_hash_sensitivity():
    a = table1_config()
    b = table1_config(channels=29)
    c = table1_config("gn")
    assert a.grid_hash() != b.grid_hash()
    assert a.grid_hash() != c.grid_hash()
    assert a.grid_hash() == table1_config().grid_hash()


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TABLE1))
    cfg = load_config(path)
    assert cfg.grid.num_channels == 30
    assert cfg.fiber.num_spans == 40
    assert cfg.fiber.beta2 == pytest.approx(-21.4456e-27, rel=1e-3)


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_toy_config_spans():
    cfg = toy_config(spans=1)
    assert cfg.fiber.num_spans == 1
    assert cfg.grid.num_channels == 2
