"""Link budget: ASE noise, table-driven NLIN, SNR, margin, rate, BER.

All functions are pure over an immutable table set and configuration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

from .config import SystemConfig
from .tables import NliTables
from .units import watt_to_dbm, linear_to_db


@dataclass(frozen=True)
class PowerAllocation:
    x: np.ndarray  # launch powers, W
    y: np.ndarray  # log-powers, ln(x)

    @classmethod
    def from_watts(cls, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise ValueError("launch powers must be positive")
        return cls(x=x, y=np.log(x))

    @classmethod
    def from_log(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(x=np.exp(y), y=y)

    @classmethod
    def flat(cls, power_watt, num_channels):
        return cls.from_watts(np.full(num_channels, float(power_watt)))


def ase_power(c, cfg: SystemConfig):
    """Per-channel amplifier noise power over the link (W)."""
    fb = cfg.fiber
    amp = cfg.amplifier
    gain = np.exp(2.0 * fb.alpha_field * fb.span_length)
    return (cfg.grid.symbol_rate * amp.planck_h * amp.ref_frequency
            * (gain - 1.0) * fb.num_spans * amp.noise_factor)


def ase_powers(cfg: SystemConfig):
    return np.array([ase_power(c, cfg) for c in range(1, cfg.grid.num_channels + 1)])


def nli_power(c, allocation: PowerAllocation, tables: NliTables):
    """NLIN power of channel c (1-based) for a power allocation (W)."""
    x = allocation.x
    if x.shape[0] != tables.num_channels:
        raise ValueError("allocation does not match table dimension")
    i = c - 1
    xc = x[i]
    cross = (xc * x**2 * tables.d2[i] + xc**2 * x * tables.d3[i]
             + x**3 * tables.d4[i])
    cross[i] = 0.0
    return xc**3 * tables.d1[i] + float(np.sum(cross))


def nli_powers(allocation: PowerAllocation, tables: NliTables):
    x = allocation.x
    xc = x[:, None]
    xn = x[None, :]
    cross = xc * xn**2 * tables.d2 + xc**2 * xn * tables.d3 + xn**3 * tables.d4
    np.fill_diagonal(cross, 0.0)
    return x**3 * tables.d1 + cross.sum(axis=1)


def snr(c, allocation, tables, cfg):
    p_ase = ase_power(c, cfg)
    p_nl = nli_power(c, allocation, tables)
    return allocation.x[c - 1] / (p_ase + p_nl)


def snrs(allocation, tables, cfg):
    return allocation.x / (ase_powers(cfg) + nli_powers(allocation, tables))


def margin(c, allocation, tables, cfg):
    """Achieved SNR over the required SNR of channel c (linear)."""
    return snr(c, allocation, tables, cfg) / cfg.modulation_for(c).snr_req


def margins(allocation, tables, cfg):
    req = np.array([cfg.modulation_for(c).snr_req
                    for c in range(1, cfg.grid.num_channels + 1)])
    return snrs(allocation, tables, cfg) / req


def channel_rates(allocation, tables, cfg, pol_factor=2):
    """Per-channel rate in bits per symbol slot: pol_factor * log2(1 + snr)."""
    return pol_factor * np.log2(1.0 + snrs(allocation, tables, cfg))


def total_rate(allocation, tables, cfg, pol_factor=2):
    """(per-channel rates, aggregate bits/symbol, spectral efficiency b/s/Hz)."""
    rates = channel_rates(allocation, tables, cfg, pol_factor)
    aggregate = float(rates.sum())
    grid = cfg.grid
    spectral_efficiency = aggregate * grid.symbol_rate / (grid.num_channels * grid.delta_f)
    return rates, aggregate, spectral_efficiency


def combine_with_input_snr(snr_egn, snr_input):
    """Harmonic SNR combination with a lumped transmitter-noise floor."""
    snr_egn = np.asarray(snr_egn, dtype=float)
    if np.any(snr_egn <= 0.0) or snr_input <= 0.0:
        raise ValueError("SNRs must be positive")
    return 1.0 / (1.0 / snr_egn + 1.0 / snr_input)


def ber_from_snr(snr_linear):
    """Theoretical PM-QPSK bit error rate for a linear SNR."""
    snr_linear = np.asarray(snr_linear, dtype=float)
    if np.any(snr_linear <= 0.0):
        raise ValueError("SNR must be positive")
    return 0.5 * erfc(np.sqrt(0.5 * snr_linear))


def snr_from_ber(ber):
    """Exact functional inverse of ber_from_snr."""
    ber = np.asarray(ber, dtype=float)
    if np.any(ber <= 0.0) or np.any(ber >= 0.5):
        raise ValueError("BER must lie in (0, 0.5)")
    return 2.0 * erfcinv(2.0 * ber) ** 2


@dataclass
class LinkBudget:
    p_ase: np.ndarray
    p_nl: np.ndarray
    snr: np.ndarray
    margin: np.ndarray
    rate: np.ndarray  # bits per symbol slot


def link_budget(allocation, tables, cfg, pol_factor=2):
    p_ase = ase_powers(cfg)
    p_nl = nli_powers(allocation, tables)
    snr_vec = allocation.x / (p_ase + p_nl)
    req = np.array([cfg.modulation_for(c).snr_req
                    for c in range(1, cfg.grid.num_channels + 1)])
    return LinkBudget(p_ase=p_ase, p_nl=p_nl, snr=snr_vec,
                      margin=snr_vec / req,
                      rate=pol_factor * np.log2(1.0 + snr_vec))


BUDGET_COLUMNS = ["channel", "f_center_hz", "power_dbm", "p_ase_dbm", "p_nl_dbm",
                  "snr_db", "margin_db", "rate_bits_per_symbol"]


def write_budget_csv(path, allocation, tables, cfg, pol_factor=2):
    """Per-channel budget report in the documented CSV layout."""
    budget = link_budget(allocation, tables, cfg, pol_factor)
    freqs = cfg.grid.center_frequencies
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BUDGET_COLUMNS)
        for i in range(cfg.grid.num_channels):
            p_nl_dbm = watt_to_dbm(budget.p_nl[i]) if budget.p_nl[i] > 0 else -np.inf
            writer.writerow([
                i + 1, repr(float(freqs[i])),
                repr(float(watt_to_dbm(allocation.x[i]))),
                repr(float(watt_to_dbm(budget.p_ase[i]))),
                repr(float(p_nl_dbm)),
                repr(float(linear_to_db(budget.snr[i]))),
                repr(float(linear_to_db(budget.margin[i]))),
                repr(float(budget.rate[i])),
            ])
    return budget
