"""Discretized NLI lookup tables.

Each channel pair's nonlinear-interference contribution is pre-integrated
into per-channel coefficients: a self-interference vector d1 and
cross-interference matrices d2, d3, d4 (all in 1/W^2), so that the NLIN
power of channel c is the cubic polynomial

    p_nl(c) = x_c^3 d1(c) + sum_n [x_c x_n^2 d2(c,n) + x_c^2 x_n d3(c,n)
                                   + x_n^3 d4(c,n)].

Main (Gaussian-signal) terms integrate |mu|^2 over the band islands that
a given power monomial selects; the modulation-dependent corrections are
the fourth-moment (phi-weighted) and sixth-moment (psi-weighted) islands,
which couple kernel values at two frequency arguments (mu * conj(mu)).
Rectangular unit-energy pulse spectra make every island a polytope that
is clipped analytically before quadrature.
"""

from __future__ import annotations

import hashlib
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .kernel import KernelContext, mu
from .lineint import island_integral, product_line_integral
from .quadrature import QuadratureSpec, derive_seed, gauss_legendre

MAGIC = b"NLIT"
FORMAT_VERSION = 1
_MODE_CODE = {"gn": 0, "egn": 1}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}
_CORR_CODE = {"off": 0, "dominant": 1, "full": 2}
_CORR_NAME = {v: k for k, v in _CORR_CODE.items()}

# Island coefficients: the Gaussian main term, the two fourth-moment
# correction families (pair-collapsed and sum-collapsed) and the
# sixth-moment family.
C_MAIN = 16.0 / 27.0
C_X1 = 80.0 / 81.0
C_X2 = 16.0 / 27.0
C_PSI = 16.0 / 81.0


class NliTableError(RuntimeError):
    """Raised on invalid (e.g. negative beyond noise) table entries."""


def channel_band(cfg: SystemConfig, c):
    """(lo, hi) of the matched-receiver band of channel c."""
    fc = float(cfg.grid.center_frequency(c))
    half = cfg.grid.symbol_rate / 2.0
    return (fc - half, fc + half)


# --- island geometry -----------------------------------------------------
#
# For fixed output frequency f, the generic island restricts
# f1 in Ba, f2 in Bb, f3 = f1 + f2 - f in Bd. The f2 interval for a given
# f1 is [L(f1), U(f1)] and the admissible f1 range follows from U > L.

def _f1_range(f, ba, bb, bd):
    lo = max(ba[0], f + bd[0] - bb[1])
    hi = min(ba[1], f + bd[1] - bb[0])
    return lo, hi


def _f2_bounds(f, f1, bb, bd):
    lower = np.maximum(bb[0], f + bd[0] - f1)
    upper = np.minimum(bb[1], f + bd[1] - f1)
    return lower, upper


def _island_empty(cfg, ba, bb, bd, c):
    band = channel_band(cfg, c)
    # The admissible f1 width is concave piecewise-linear in f, so its
    # maximum over the band sits at an endpoint or a breakpoint.
    candidates = [band[0], band[1],
                  ba[1] - bd[1] + bb[0], ba[0] - bd[0] + bb[1]]
    for f in candidates:
        f = min(max(f, band[0]), band[1])
        lo, hi = _f1_range(f, ba, bb, bd)
        if hi > lo:
            return False
    return True


def _main_island(f, ba, bb, bd, ctx, order):
    """integral of |mu|^2 over the island at output frequency f (tensor GL)."""
    lo, hi = _f1_range(f, ba, bb, bd)
    if hi <= lo:
        return 0.0
    # Kinks of the f2-interval endpoints split the f1 range.
    breaks = sorted({lo, hi} | {p for p in (f + bd[0] - bb[0], f + bd[1] - bb[1])
                                if lo < p < hi})
    x01, w01 = np.polynomial.legendre.leggauss(order)
    x01 = 0.5 * (x01 + 1.0)
    w01 = 0.5 * w01
    total = 0.0
    for s0, s1 in zip(breaks[:-1], breaks[1:]):
        f1, w1 = gauss_legendre(s0, s1, order)
        l2, u2 = _f2_bounds(f, f1, bb, bd)
        width = np.maximum(u2 - l2, 0.0)
        f2 = l2[:, None] + x01[None, :] * width[:, None]
        w = w1[:, None] * w01[None, :] * width[:, None]
        m = mu(f1[:, None], f2, f, ctx)
        total += float(np.sum(w * (m.real**2 + m.imag**2)))
    return total


def _sample_pair(u1, u2, f, ba, bb, bd):
    """Map two unit-cube coordinates to an island point (f1, f2, jacobian)."""
    lo, hi = _f1_range(f, ba, bb, bd)
    width1 = max(hi - lo, 0.0)
    f1 = lo + u1 * width1
    l2, u2b = _f2_bounds(f, f1, bb, bd)
    width2 = np.maximum(u2b - l2, 0.0)
    f2 = l2 + u2 * width2
    return f1, f2, width1 * width2


def _x1_integrand(u, f, ctx, ba, bb, bd):
    """Pair-collapsed fourth-moment island: mu(f1,f2,f) mu*(f1,f2',f)."""
    f1, f2, jac = _sample_pair(u[:, 0], u[:, 1], f, ba, bb, bd)
    l2, u2b = _f2_bounds(f, f1, bb, bd)
    width2 = np.maximum(u2b - l2, 0.0)
    f2p = l2 + u[:, 2] * width2
    prod = mu(f1, f2, f, ctx) * np.conj(mu(f1, f2p, f, ctx))
    return prod.real * (jac * width2)


def _x2_integrand(u, f, ctx, ba, bb, bd, ba2, bb2):
    """Sum-collapsed fourth-moment island: both pairs share f1 + f2."""
    f1, f2, jac = _sample_pair(u[:, 0], u[:, 1], f, ba, bb, bd)
    s = f1 + f2
    lo2 = np.maximum(bb2[0], s - ba2[1])
    hi2 = np.minimum(bb2[1], s - ba2[0])
    width2 = np.maximum(hi2 - lo2, 0.0)
    f2p = lo2 + u[:, 2] * width2
    prod = mu(f1, f2, f, ctx) * np.conj(mu(s - f2p, f2p, f, ctx))
    return prod.real * (jac * width2)


def _psi_integrand(u, f, ctx, ba, bb, bd):
    """Sixth-moment island: two independent pump pairs, |integral of mu|^2."""
    f1, f2, jac1 = _sample_pair(u[:, 0], u[:, 1], f, ba, bb, bd)
    f1p, f2p, jac2 = _sample_pair(u[:, 2], u[:, 3], f, ba, bb, bd)
    prod = mu(f1, f2, f, ctx) * np.conj(mu(f1p, f2p, f, ctx))
    return prod.real * (jac1 * jac2)


# --- term evaluation -----------------------------------------------------

def _outer_nodes(cfg, c, order):
    lo, hi = channel_band(cfg, c)
    return gauss_legendre(lo, hi, order)


def _product_cap(cfg):
    """Safe bound on |(f1 - f)(f2 - f)| over every non-empty island."""
    grid = cfg.grid
    r = grid.symbol_rate
    span = (grid.num_channels - 1) * grid.delta_f + 3.0 * r
    return 3.0 * r * span


def _main_term(cfg, c, islands, ctx, q: QuadratureSpec):
    """sum of weighted main islands, integrated over the receiver band.

    islands: list of (multiplicity, ba, bb, bd). The 2-D island integrals
    reduce to resonance-resolved Gauss-Legendre sums along the
    phase-matching product; the error comes from refining both the panel
    order and the panel count.
    """
    line = product_line_integral(ctx, _product_cap(cfg))

    def run(order2, outer, transits):
        fs, ws = _outer_nodes(cfg, c, outer)
        total = 0.0
        for mult, ba, bb, bd in islands:
            if _island_empty(cfg, ba, bb, bd, c):
                continue
            total += mult * sum(
                w * island_integral(f, ba, bb, bd, line, order2, transits)
                for f, w in zip(fs, ws))
        return total

    value = run(q.order_2d, q.outer_order, 4.0)
    check = run(max(q.order_2d - 8, 8), max(q.outer_order - 4, 6), 6.0)
    scale = C_MAIN / cfg.grid.symbol_rate**3
    err = max(abs(value - check), 2e-3 * abs(value)) * scale
    return value * scale, err


def _qmc_correction(cfg, c, integrand, dim, n0, seed, q: QuadratureSpec,
                    abs_floor=0.0):
    """Replicated scrambled-Sobol estimate of an island correction term.

    integrand(u, f) maps unit-cube points to jacobian-weighted values at
    outer frequency f. The sample budget doubles until the replicate error
    estimate is below the target relative tolerance; abs_floor widens the
    acceptance for terms that are negligible against the main term.
    """
    from scipy.stats import qmc as sqmc

    fs, ws = _outer_nodes(cfg, c, q.outer_order)
    n = n0
    for attempt in range(q.max_doublings + 1):
        totals = np.zeros(q.replicates)
        for r in range(q.replicates):
            acc = 0.0
            for i, (f, w) in enumerate(zip(fs, ws)):
                sampler = sqmc.Sobol(d=dim, scramble=True,
                                     seed=derive_seed(seed, "f", i, "rep", r, "n", n))
                acc += w * float(np.mean(integrand(sampler.random(n), f)))
            totals[r] = acc
        value = float(np.mean(totals))
        err = float(np.std(totals, ddof=1) / np.sqrt(q.replicates))
        if err <= q.target_rel_tol * max(abs(value), abs_floor, 1e-300):
            break
        n *= 2
    return value, err


def sci_coefficient(c, cfg: SystemConfig, q: QuadratureSpec, seed=None):
    """Self-interference coefficient d1(c) with its error estimate (1/W^2)."""
    ctx = KernelContext.from_fiber(cfg.fiber)
    if seed is None:
        seed = derive_seed(q.base_seed, "sci", c)
    b = channel_band(cfg, c)
    r = cfg.grid.symbol_rate
    value, err2 = _main_term(cfg, c, [(1.0, b, b, b)], ctx, q)
    main = value
    err2 = err2**2
    phi, psi = cfg.effective_phi_psi(c)
    if phi != 0.0:
        floor = 0.005 * main * r**4 / abs(phi)
        x1, e1 = _qmc_correction(
            cfg, c, lambda u, f: _x1_integrand(u, f, ctx, b, b, b), 3,
            q.samples_3d, derive_seed(seed, "x1"), q, abs_floor=floor / C_X1)
        x2, e2 = _qmc_correction(
            cfg, c, lambda u, f: _x2_integrand(u, f, ctx, b, b, b, b, b), 3,
            q.samples_3d, derive_seed(seed, "x2"), q, abs_floor=floor / C_X2)
        value += phi * (C_X1 * x1 + C_X2 * x2) / r**4
        err2 += (phi / r**4) ** 2 * ((C_X1 * e1) ** 2 + (C_X2 * e2) ** 2)
    if psi != 0.0:
        p, ep = _qmc_correction(
            cfg, c, lambda u, f: _psi_integrand(u, f, ctx, b, b, b), 4,
            q.samples_4d, derive_seed(seed, "psi"), q,
            abs_floor=0.005 * main * r**5 / (abs(psi) * C_PSI))
        value += psi * C_PSI * p / r**5
        err2 += (psi * C_PSI * ep / r**5) ** 2
    return value, float(np.sqrt(err2))


def xci_coefficients(c, n, cfg: SystemConfig, q: QuadratureSpec,
                     corrections="full", seed=None):
    """Cross-interference coefficients (d2, d3, d4)(c, n) and their errors.

    Band assignments of (f1, f2, f3) to the channel-of-interest band bc and
    the interferer band bn select the power monomial: one pump from the COI
    gives d3-type terms, one from the interferer gives d2-type terms, and
    the all-interferer island gives d4. Asymmetric assignments carry the
    f1<->f2 multiplicity 2, which reproduces the classic 32/27 cross-phase
    weighting for the dominant d2 island.
    """
    if c == n:
        raise ValueError("xci_coefficients requires c != n")
    ctx = KernelContext.from_fiber(cfg.fiber)
    if seed is None:
        seed = derive_seed(q.base_seed, "xci", c, n)
    bc = channel_band(cfg, c)
    bn = channel_band(cfg, n)
    r = cfg.grid.symbol_rate
    phi_c, psi_c = cfg.effective_phi_psi(c)
    phi_n, psi_n = cfg.effective_phi_psi(n)

    d2, e2 = _main_term(cfg, c, [(2.0, bc, bn, bn), (1.0, bn, bn, bc)], ctx, q)
    d3, e3 = _main_term(cfg, c, [(2.0, bc, bn, bc), (1.0, bc, bc, bn)], ctx, q)
    d4, e4 = _main_term(cfg, c, [(1.0, bn, bn, bn)], ctx, q)
    e2, e3, e4 = e2**2, e3**2, e4**2

    # Error floor: a correction is converged once its replicate error is
    # small against the entry's main term (0.5% of it), not against the
    # correction itself, which may be arbitrarily close to zero.
    ref = max(d2, d3, d4, 1e-300)

    def x1_term(ba, bb, bd, tag, phi):
        if _island_empty(cfg, ba, bb, bd, c):
            return 0.0, 0.0
        return _qmc_correction(
            cfg, c, lambda u, f: _x1_integrand(u, f, ctx, ba, bb, bd), 3,
            q.samples_3d, derive_seed(seed, tag), q,
            abs_floor=0.5 * ref * r**4 / (abs(phi) * C_X1))

    def x2_term(ba, bb, bd, ba2, bb2, tag, phi):
        if _island_empty(cfg, ba, bb, bd, c):
            return 0.0, 0.0
        return _qmc_correction(
            cfg, c, lambda u, f: _x2_integrand(u, f, ctx, ba, bb, bd, ba2, bb2), 3,
            q.samples_3d, derive_seed(seed, tag), q,
            abs_floor=0.5 * ref * r**4 / (abs(phi) * C_X2))

    if corrections != "off":
        if phi_n != 0.0:
            # d2 correction: interferer fourth moment.
            v1, g1 = x1_term(bc, bn, bn, "d2x1", phi_n)
            v2, g2 = x2_term(bn, bn, bc, bn, bn, "d2x2", phi_n)
            d2 += phi_n * (C_X1 * v1 + C_X2 * v2) / r**4
            e2 += (phi_n / r**4) ** 2 * ((C_X1 * g1) ** 2 + (C_X2 * g2) ** 2)
        if phi_c != 0.0:
            # d3 corrections: COI fourth moment, both island families.
            v1, g1 = x1_term(bn, bc, bc, "d3x1", phi_c)
            v2, g2 = x2_term(bc, bc, bn, bc, bc, "d3x2", phi_c)
            d3 += phi_c * (C_X1 * v1 + C_X2 * v2) / r**4
            e3 += (phi_c / r**4) ** 2 * ((C_X1 * g1) ** 2 + (C_X2 * g2) ** 2)
        if phi_n != 0.0 and corrections == "full" and not _island_empty(cfg, bn, bn, bn, c):
            # d4 fourth-moment correction (dropped in "dominant" mode).
            v1, g1 = x1_term(bn, bn, bn, "d4x1", phi_n)
            v2, g2 = x2_term(bn, bn, bn, bn, bn, "d4x2", phi_n)
            d4 += phi_n * (C_X1 * v1 + C_X2 * v2) / r**4
            e4 += (phi_n / r**4) ** 2 * ((C_X1 * g1) ** 2 + (C_X2 * g2) ** 2)
        if psi_n != 0.0 and not _island_empty(cfg, bn, bn, bn, c):
            # d4 sixth-moment correction.
            v, g = _qmc_correction(
                cfg, c, lambda u, f: _psi_integrand(u, f, ctx, bn, bn, bn), 4,
                q.samples_4d, derive_seed(seed, "d4psi"), q,
                abs_floor=0.5 * ref * r**5 / (abs(psi_n) * C_PSI))
            d4 += psi_n * C_PSI * v / r**5
            e4 += (psi_n * C_PSI * g / r**5) ** 2

    return (d2, d3, d4), (float(np.sqrt(e2)), float(np.sqrt(e3)), float(np.sqrt(e4)))


# --- table assembly ------------------------------------------------------

@dataclass
class NliTables:
    d1: np.ndarray  # (N,), 1/W^2
    d2: np.ndarray  # (N, N), zero diagonal
    d3: np.ndarray
    d4: np.ndarray
    err_d1: np.ndarray
    err_d2: np.ndarray
    err_d3: np.ndarray
    err_d4: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def num_channels(self):
        return self.d1.shape[0]

    def validate_nonnegative(self):
        for name in ("d1", "d2", "d3", "d4"):
            arr = getattr(self, name)
            if np.any(arr < 0.0):
                worst = float(arr.min())
                raise NliTableError(f"negative entry {worst:g} in {name}")

    def matches(self, cfg: SystemConfig):
        return self.metadata.get("grid_hash") == cfg.grid_hash()


def _clamp_entry(value, err, what):
    """Zero out quadrature noise around 0; genuine negatives are fatal."""
    if value >= 0.0:
        return value
    if value >= -3.0 * err:
        return 0.0
    raise NliTableError(f"negative table entry {value:g} (err {err:g}) in {what}")


def _sci_job(args):
    c, cfg, q = args
    return c, sci_coefficient(c, cfg, q)


def _xci_job(args):
    c, n, cfg, q, corrections = args
    return c, n, xci_coefficients(c, n, cfg, q, corrections=corrections)


def build_tables(cfg: SystemConfig, q: QuadratureSpec, corrections="full",
                 workers=None, progress=None):
    """Build the full lookup table set for a system configuration.

    The grid is uniform and every island integrand depends on frequencies
    only through differences, so the coefficients are exactly invariant
    under channel translation and reflection: d1 is one number and
    d2/d3/d4 depend only on |n - c|. One representative pair is computed
    per separation and broadcast to all cells.

    Deterministic for a fixed base seed: every separation derives its own
    seed, so the result is identical regardless of the worker count.
    `workers` defaults to the EGNOPT_WORKERS environment variable, then to
    the available cores.
    """
    if corrections not in _CORR_CODE:
        raise ValueError(f"corrections must be one of {sorted(_CORR_CODE)}")
    nch = cfg.grid.num_channels
    d1 = np.zeros(nch)
    e1 = np.zeros(nch)
    d2, d3, d4 = (np.zeros((nch, nch)) for _ in range(3))
    g2, g3, g4 = (np.zeros((nch, nch)) for _ in range(3))

    sci_jobs = [(1, cfg, q)]
    xci_jobs = [(1, 1 + k, cfg, q, corrections) for k in range(1, nch)]

    if workers is None:
        workers = int(os.environ.get("EGNOPT_WORKERS", os.cpu_count() or 1))
    total = len(sci_jobs) + len(xci_jobs)
    done = 0

    def note(msg):
        if progress is not None:
            progress(f"[{done}/{total}] {msg}")

    def fill_sci(val, err):
        d1[:] = _clamp_entry(val, err, "d1")
        e1[:] = err

    def fill_xci(k, vals, errs):
        v2, v3, v4 = vals
        q2, q3, q4 = errs
        v2 = _clamp_entry(v2, q2, f"d2(sep {k})")
        v3 = _clamp_entry(v3, q3, f"d3(sep {k})")
        v4 = _clamp_entry(v4, q4, f"d4(sep {k})")
        for i in range(nch):
            for j in (i - k, i + k):
                if 0 <= j < nch:
                    d2[i, j], d3[i, j], d4[i, j] = v2, v3, v4
                    g2[i, j], g3[i, j], g4[i, j] = q2, q3, q4

    if workers > 1 and total > 2:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for _, (val, err) in pool.map(_sci_job, sci_jobs):
                fill_sci(val, err)
                done += 1
                note("d1")
            for c, n, (vals, errs) in pool.map(_xci_job, xci_jobs):
                fill_xci(n - c, vals, errs)
                done += 1
                note(f"d2..d4(sep {n - c})")
    else:
        for job in sci_jobs:
            _, (val, err) = _sci_job(job)
            fill_sci(val, err)
            done += 1
            note("d1")
        for job in xci_jobs:
            c, n, (vals, errs) = _xci_job(job)
            fill_xci(n - c, vals, errs)
            done += 1
            note(f"d2..d4(sep {n - c})")

    tables = NliTables(
        d1=d1, d2=d2, d3=d3, d4=d4,
        err_d1=e1, err_d2=g2, err_d3=g3, err_d4=g4,
        metadata={
            "grid_hash": cfg.grid_hash(),
            "model_mode": cfg.model_mode,
            "corrections": corrections,
            "quadrature_digest": q.digest(),
            "base_seed": q.base_seed,
        },
    )
    tables.validate_nonnegative()
    return tables


# --- binary cache --------------------------------------------------------

class TableCacheError(RuntimeError):
    """Raised when a table cache file is missing, corrupt, or mismatched."""


def save_tables(tables: NliTables, path):
    """Write the little-endian binary cache format."""
    nch = tables.num_channels
    header = MAGIC + struct.pack(
        "<IQIBBQ", FORMAT_VERSION, tables.metadata["grid_hash"], nch,
        _MODE_CODE[tables.metadata["model_mode"]],
        _CORR_CODE[tables.metadata["corrections"]],
        tables.metadata["quadrature_digest"])
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (tables.d1, tables.d2, tables.d3, tables.d4,
                              tables.err_d1, tables.err_d2, tables.err_d3,
                              tables.err_d4))
    payload = header + body
    checksum = hashlib.blake2b(payload, digest_size=8).digest()
    with open(path, "wb") as fh:
        fh.write(payload + checksum)


def load_tables(path, cfg: SystemConfig = None):
    """Load a table cache; rejects corruption and config-hash mismatches."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 30 or blob[:4] != MAGIC:
        raise TableCacheError(f"{path}: not a table cache file")
    payload, checksum = blob[:-8], blob[-8:]
    if hashlib.blake2b(payload, digest_size=8).digest() != checksum:
        raise TableCacheError(f"{path}: checksum mismatch (corrupt file)")
    version, grid_hash, nch, mode_code, corr_code, qdigest = struct.unpack(
        "<IQIBBQ", payload[4:30])
    if version != FORMAT_VERSION:
        raise TableCacheError(f"{path}: unsupported format version {version}")
    expect = 30 + 8 * (2 * nch + 6 * nch * nch)
    if len(payload) != expect:
        raise TableCacheError(f"{path}: truncated body")
    off = 30

    def pull(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=off)
        off += 8 * count
        return arr.reshape(shape).copy()

    d1 = pull((nch,))
    d2, d3, d4 = pull((nch, nch)), pull((nch, nch)), pull((nch, nch))
    e1 = pull((nch,))
    e2, e3, e4 = pull((nch, nch)), pull((nch, nch)), pull((nch, nch))
    tables = NliTables(d1=d1, d2=d2, d3=d3, d4=d4, err_d1=e1, err_d2=e2,
                       err_d3=e3, err_d4=e4,
                       metadata={"grid_hash": grid_hash,
                                 "model_mode": _MODE_NAME[mode_code],
                                 "corrections": _CORR_NAME[corr_code],
                                 "quadrature_digest": qdigest})
    if cfg is not None and not tables.matches(cfg):
        raise TableCacheError(f"{path}: grid hash does not match configuration")
    return tables
