"""Flat launch-power sweep: the classic SNR-versus-power curve.

At low power the link is ASE-limited (SNR rises 1 dB per dB), at high
power nonlinear interference takes over (SNR falls 2 dB per dB); the
optimum sits where p_nl = p_ase / 2.

Run: python3 demos/03_power_sweep.py
"""

import numpy as np

from egnopt.budget import PowerAllocation, ase_powers, nli_powers, snrs
from egnopt.config import load_config
from egnopt.optimize import solve_flat
from egnopt.quadrature import QuadratureSpec
from egnopt.tables import build_tables
from egnopt.units import dbm_to_watt, linear_to_db, watt_to_dbm

cfg = load_config("configs/small_gn.json")
tables = build_tables(cfg, QuadratureSpec())
n = cfg.grid.num_channels

print("power_dbm  snr_db  p_ase_dbm  p_nl_dbm")
for p_dbm in np.arange(-6.0, 7.0, 1.0):
    alloc = PowerAllocation.flat(dbm_to_watt(p_dbm), n)
    snr = float(linear_to_db(snrs(alloc, tables, cfg)[n // 2]))
    p_ase = float(watt_to_dbm(ase_powers(cfg)[n // 2]))
    p_nl = float(watt_to_dbm(nli_powers(alloc, tables)[n // 2]))
    print(f"{p_dbm:9.1f} {snr:7.2f} {p_ase:10.2f} {p_nl:9.2f}")

sol = solve_flat("margin", tables, cfg)
best = sol.history[0]["flat_power_dbm"]
print(f"\nFlat optimum: {best:.2f} dBm, worst-channel margin "
      f"{linear_to_db(sol.margins.min()):.2f} dB over the SNR requirement")

# Closed-form check at the optimum: p_nl should be half of p_ase.
alloc = PowerAllocation.flat(dbm_to_watt(best), n)
ratio = nli_powers(alloc, tables)[n // 2] / ase_powers(cfg)[n // 2]
print(f"p_nl / p_ase at the optimum: {ratio:.3f} (ASE-limit rule of thumb: 0.5)")
