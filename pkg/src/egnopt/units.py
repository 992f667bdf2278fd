"""Unit conversions and modulation excess moments.

Everything internal to the package is strict SI (Hz, W, s, m). The
conversions here are the only place dB, dBm, ps^2/km etc. are allowed
to appear.
"""

from __future__ import annotations

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s
PLANCK = 6.62607015e-34  # J*s


def dbm_to_watt(p_dbm):
    """Convert power in dBm to watts."""
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def watt_to_dbm(p_watt):
    """Convert power in watts to dBm."""
    return 10.0 * np.log10(np.asarray(p_watt, dtype=float) / 1e-3)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def attenuation_to_field_loss(alpha_db_per_km):
    """Convert a dB/km power-attenuation figure to the field-loss alpha in 1/m.

    The returned alpha satisfies exp(-2*alpha*L) == 10**(-alpha_db_per_km*L_km/10),
    i.e. the /20 rule expressed per metre.
    """
    alpha_db_per_km = float(alpha_db_per_km)
    if alpha_db_per_km <= 0.0:
        raise ValueError(f"attenuation must be positive, got {alpha_db_per_km} dB/km")
    return alpha_db_per_km * np.log(10.0) / 20.0 / 1000.0


def field_loss_to_attenuation(alpha_field):
    """Inverse of attenuation_to_field_loss (1/m -> dB/km)."""
    return float(alpha_field) * 20.0 * 1000.0 / np.log(10.0)


def dispersion_to_beta2(d_s_per_m2, f_ref_hz):
    """Convert the dispersion parameter D (s/m^2) to beta2 (s^2/m) at f_ref."""
    f_ref_hz = float(f_ref_hz)
    if f_ref_hz <= 0.0:
        raise ValueError("reference frequency must be positive")
    lam = SPEED_OF_LIGHT / f_ref_hz
    return -float(d_s_per_m2) * lam**2 / (2.0 * np.pi * SPEED_OF_LIGHT)


def dispersion_ps_nm_km_to_beta2_ps2_km(d_ps_nm_km, f_ref_hz):
    """Same conversion in engineering units (ps/nm/km -> ps^2/km)."""
    # 1 ps/(nm*km) = 1e-6 s/m^2; 1 s^2/m = 1e27 ps^2/km
    return dispersion_to_beta2(d_ps_nm_km * 1e-6, f_ref_hz) * 1e27


def excess_moments(points, probabilities=None):
    """Excess 4th/6th-moment parameters (phi, psi) of a constellation.

    With mu_k = E[|a|^k] over the unit-energy-normalized constellation:
        phi = mu4/mu2^2 - 2
        psi = mu6/mu2^3 - 9*mu4/mu2^2 + 12
    so a circularly-symmetric Gaussian gives (0, 0) and any constant-modulus
    format gives (-1, 4).
    """
    points = np.asarray(points, dtype=complex).ravel()
    if points.size == 0:
        raise ValueError("empty constellation")
    if probabilities is None:
        probabilities = np.full(points.size, 1.0 / points.size)
    else:
        probabilities = np.asarray(probabilities, dtype=float).ravel()
        if probabilities.shape != points.shape:
            raise ValueError("probabilities must match points")
        if not np.isclose(probabilities.sum(), 1.0, atol=1e-9):
            raise ValueError("probabilities must sum to 1")
    mod2 = np.abs(points) ** 2
    mu2 = float(np.dot(probabilities, mod2))
    if mu2 <= 0.0:
        raise ValueError("degenerate all-zero constellation")
    mu4 = float(np.dot(probabilities, mod2**2))
    mu6 = float(np.dot(probabilities, mod2**3))
    r4 = mu4 / mu2**2
    r6 = mu6 / mu2**3
    return r4 - 2.0, r6 - 9.0 * r4 + 12.0
