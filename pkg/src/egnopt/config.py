"""System configuration: fiber, grid, modulation and amplifier parameters.

A SystemConfig is a frozen value object in strict SI units. JSON configs
carry the familiar engineering units (dB/km, ps^2/km, GHz, dBm) and are
converted exactly once, here.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .units import (
    attenuation_to_field_loss,
    db_to_linear,
    dispersion_ps_nm_km_to_beta2_ps2_km,
    PLANCK,
)


class ConfigError(ValueError):
    """Raised for invalid or malformed system configuration."""


@dataclass(frozen=True)
class FiberParams:
    alpha_field: float  # field-loss coefficient, 1/m
    beta2: float  # group-velocity dispersion, s^2/m
    gamma: float  # nonlinearity coefficient, 1/(W*m)
    span_length: float  # m
    num_spans: int
    beta3: float = 0.0  # s^3/m, carried but unused by the kernel

    def __post_init__(self):
        if self.alpha_field <= 0.0:
            raise ConfigError("alpha_field must be > 0")
        if self.gamma < 0.0:
            raise ConfigError("gamma must be >= 0")
        if self.span_length <= 0.0:
            raise ConfigError("span_length must be > 0")
        if self.num_spans < 1:
            raise ConfigError("num_spans must be >= 1")


@dataclass(frozen=True)
class ChannelGrid:
    f0: float  # lowest available frequency, Hz
    delta_f: float  # spectral granularity, Hz
    num_channels: int
    symbol_rate: float  # per-channel baud, Hz, uniform across channels

    def __post_init__(self):
        if self.num_channels < 1:
            raise ConfigError("num_channels must be >= 1")
        if self.delta_f <= 0.0 or self.symbol_rate <= 0.0:
            raise ConfigError("delta_f and symbol_rate must be > 0")
        if self.symbol_rate > self.delta_f * (1.0 + 1e-12):
            raise ConfigError("symbol_rate must not exceed delta_f (spectral overlap)")

    def center_frequency(self, c):
        """Center frequency of channel c (1-based)."""
        c = np.asarray(c)
        return self.f0 + self.delta_f / 2.0 + (c - 1) * self.delta_f

    @property
    def center_frequencies(self):
        return self.center_frequency(np.arange(1, self.num_channels + 1))


@dataclass(frozen=True)
class ModulationSpec:
    name: str
    phi: float  # excess 4th-moment parameter
    psi: float  # excess 6th-moment parameter
    snr_req: float  # required SNR, linear

    def __post_init__(self):
        if self.snr_req <= 0.0:
            raise ConfigError("snr_req must be > 0")


@dataclass(frozen=True)
class AmplifierSpec:
    noise_factor: float  # F, linear
    n_sp: float  # spontaneous-emission factor
    ref_frequency: float  # Hz, optical carrier for ASE
    planck_h: float = PLANCK

    def __post_init__(self):
        if self.noise_factor < 1.0:
            raise ConfigError("noise factor must be >= 1")
        if self.ref_frequency <= 0.0:
            raise ConfigError("ref_frequency must be > 0")

    @classmethod
    def from_noise_figure(cls, noise_factor, ref_frequency):
        return cls(noise_factor=float(noise_factor), n_sp=float(noise_factor) / 2.0,
                   ref_frequency=float(ref_frequency))

    @classmethod
    def from_n_sp(cls, n_sp, ref_frequency):
        # F = 2*n_sp by default; `calibrate` reports both readings.
        return cls(noise_factor=2.0 * float(n_sp), n_sp=float(n_sp),
                   ref_frequency=float(ref_frequency))


@dataclass(frozen=True)
class SystemConfig:
    fiber: FiberParams
    grid: ChannelGrid
    modulation: ModulationSpec  # uniform across channels in v1
    amplifier: AmplifierSpec
    model_mode: str = "egn"  # "egn" | "gn"

    def __post_init__(self):
        if self.model_mode not in ("egn", "gn"):
            raise ConfigError(f"model_mode must be 'egn' or 'gn', got {self.model_mode!r}")

    def modulation_for(self, c):
        return self.modulation

    def effective_phi_psi(self, c):
        """(phi, psi) seen by the kernel; GN mode forces (0, 0)."""
        if self.model_mode == "gn":
            return 0.0, 0.0
        m = self.modulation_for(c)
        return m.phi, m.psi

    def with_model_mode(self, mode):
        return SystemConfig(fiber=self.fiber, grid=self.grid,
                            modulation=self.modulation, amplifier=self.amplifier,
                            model_mode=mode)

    def canonical_dict(self):
        g = self.grid
        fb = self.fiber
        m = self.modulation
        a = self.amplifier
        return {
            "fiber": {"alpha_field": fb.alpha_field, "beta2": fb.beta2,
                      "beta3": fb.beta3, "gamma": fb.gamma,
                      "span_length": fb.span_length, "num_spans": fb.num_spans},
            "grid": {"f0": g.f0, "delta_f": g.delta_f,
                     "num_channels": g.num_channels, "symbol_rate": g.symbol_rate},
            "modulation": {"name": m.name, "phi": m.phi, "psi": m.psi,
                           "snr_req": m.snr_req},
            "amplifier": {"noise_factor": a.noise_factor, "n_sp": a.n_sp,
                          "ref_frequency": a.ref_frequency, "planck_h": a.planck_h},
            "model_mode": self.model_mode,
        }

    def grid_hash(self):
        """Deterministic 64-bit hash over the canonicalized config."""
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def _take(d, key, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    return d.pop(key)


def _reject_unknown(d, section):
    if d:
        raise ConfigError(f"unknown keys in {section}: {sorted(d)}")


# Built-in constellations for deriving (phi, psi) by name.
_QAM16 = [complex(i, q) for i in (-3, -1, 1, 3) for q in (-3, -1, 1, 3)]
_QAM64 = [complex(i, q) for i in range(-7, 8, 2) for q in range(-7, 8, 2)]
KNOWN_MODULATIONS = {
    "gaussian": (0.0, 0.0),
    "pm-qpsk": (-1.0, 4.0),
    "qpsk": (-1.0, 4.0),
    "16qam": (-0.68, 2.08),
    "64qam": (-0.619047619047619, 1.7951770889742271),
}


def config_from_dict(doc):
    """Build a SystemConfig from a parsed JSON document. Unknown keys rejected."""
    doc = dict(doc)
    fiber_d = dict(_take(doc, "fiber"))
    grid_d = dict(_take(doc, "grid"))
    mod_d = dict(_take(doc, "modulation"))
    amp_d = dict(_take(doc, "amplifier"))
    model_d = dict(_take(doc, "model", required=False, default={"mode": "egn"}))
    _reject_unknown(doc, "config")

    f_ref = float(_take(grid_d, "f0_thz")) * 1e12  # reused as ASE carrier below
    grid = ChannelGrid(
        f0=f_ref,
        delta_f=float(_take(grid_d, "delta_f_ghz")) * 1e9,
        num_channels=int(_take(grid_d, "channels")),
        symbol_rate=float(_take(grid_d, "baud_gbd")) * 1e9,
    )
    _reject_unknown(grid_d, "grid")

    alpha_db = float(_take(fiber_d, "alpha_db_per_km"))
    if "beta2_ps2_km" in fiber_d:
        beta2_ps2_km = float(_take(fiber_d, "beta2_ps2_km"))
        _take(fiber_d, "dispersion_ps_nm_km", required=False)
    else:
        disp = float(_take(fiber_d, "dispersion_ps_nm_km"))
        beta2_ps2_km = dispersion_ps_nm_km_to_beta2_ps2_km(disp, f_ref)
    fiber = FiberParams(
        alpha_field=attenuation_to_field_loss(alpha_db),
        beta2=beta2_ps2_km * 1e-27,
        beta3=float(_take(fiber_d, "beta3_ps3_km", required=False, default=0.0)) * 1e-39,
        gamma=float(_take(fiber_d, "gamma_w_km")) * 1e-3,
        span_length=float(_take(fiber_d, "span_km")) * 1e3,
        num_spans=int(_take(fiber_d, "spans")),
    )
    _reject_unknown(fiber_d, "fiber")

    name = str(_take(mod_d, "name"))
    snr_req_db = float(_take(mod_d, "snr_req_db"))
    phi = _take(mod_d, "phi", required=False)
    psi = _take(mod_d, "psi", required=False)
    if phi is None or psi is None:
        key = name.lower()
        if key not in KNOWN_MODULATIONS:
            raise ConfigError(
                f"modulation {name!r} unknown; supply phi and psi explicitly")
        known_phi, known_psi = KNOWN_MODULATIONS[key]
        phi = known_phi if phi is None else float(phi)
        psi = known_psi if psi is None else float(psi)
    modulation = ModulationSpec(name=name, phi=float(phi), psi=float(psi),
                                snr_req=float(db_to_linear(snr_req_db)))
    _reject_unknown(mod_d, "modulation")

    if "nf_db" in amp_d:
        amp = AmplifierSpec.from_noise_figure(db_to_linear(float(_take(amp_d, "nf_db"))), f_ref)
        _take(amp_d, "n_sp", required=False)
    else:
        amp = AmplifierSpec.from_n_sp(float(_take(amp_d, "n_sp")), f_ref)
    _reject_unknown(amp_d, "amplifier")

    mode = str(_take(model_d, "mode", required=False, default="egn"))
    _reject_unknown(model_d, "model")

    return SystemConfig(fiber=fiber, grid=grid, modulation=modulation,
                        amplifier=amp, model_mode=mode)


def load_config(path):
    """Load a SystemConfig from a JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(doc)
