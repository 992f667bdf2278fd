"""Convex launch-power allocation in log-power variables.

Two problems over y = ln(x):

* max-min SNR margin, solved as: minimize the slack s subject to
  log(snr_req_c) + log(p_ase_c + p_nl_c(e^y)) - y_c - s <= 0, via an
  outer log-barrier loop with damped Newton inner iterations;
* max sum rate in the high-SNR surrogate: maximize
  sum_c (y_c - log(p_ase_c + p_nl_c(e^y))).

Each log(p_ase + p_nl(e^y)) term is a log-sum-exp of affine functions of
y plus a positive constant, hence convex as long as every table entry is
nonnegative. Power bounds enter through barrier terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .budget import PowerAllocation, ase_powers, margins, total_rate
from .config import SystemConfig
from .tables import NliTables
from .units import dbm_to_watt, watt_to_dbm


@dataclass(frozen=True)
class BarrierSettings:
    t0: float = 1.0
    t_growth: float = 10.0
    duality_gap_tol: float = 1e-8
    newton_grad_tol: float = 1e-9
    max_outer: int = 60
    max_inner: int = 80
    ls_accept: float = 0.3
    ls_shrink: float = 0.5
    x_min: float = dbm_to_watt(-30.0)  # W, per channel
    x_max: float = dbm_to_watt(15.0)
    pol_factor: int = 2

    def __post_init__(self):
        if self.t0 <= 0 or self.t_growth <= 1:
            raise ValueError("need t0 > 0 and t_growth > 1")
        if not (0 < self.ls_accept < 0.5 and 0 < self.ls_shrink < 1):
            raise ValueError("invalid line-search parameters")
        if not (0 < self.x_min < self.x_max):
            raise ValueError("invalid power bounds")


@dataclass
class Solution:
    allocation: PowerAllocation
    objective: float
    snr: np.ndarray
    margins: np.ndarray
    outer_iterations: int
    inner_iterations: int
    converged: bool
    history: list = field(default_factory=list)


class _NliPolynomial:
    """p_nl_c(e^y) as a positive sum of exponentials of affine functions."""

    def __init__(self, tables: NliTables):
        n = tables.num_channels
        self.n = n
        self.exponents = []  # per channel: (K, n) integer exponent rows
        self.weights = []  # per channel: (K,) table coefficients
        for i in range(n):
            rows, w = [], []

            def add(vec, coef):
                if coef != 0.0:
                    rows.append(vec)
                    w.append(coef)

            e = np.zeros(n)
            e[i] = 3.0
            add(e, tables.d1[i])
            for j in range(n):
                if j == i:
                    continue
                e = np.zeros(n); e[i] = 1.0; e[j] = 2.0
                add(e, tables.d2[i, j])
                e = np.zeros(n); e[i] = 2.0; e[j] = 1.0
                add(e, tables.d3[i, j])
                e = np.zeros(n); e[j] = 3.0
                add(e, tables.d4[i, j])
            if rows:
                self.exponents.append(np.vstack(rows))
                self.weights.append(np.asarray(w))
            else:
                self.exponents.append(np.zeros((0, n)))
                self.weights.append(np.zeros(0))

    def value(self, y):
        return np.array([float(np.dot(w, np.exp(ex @ y)))
                         for ex, w in zip(self.exponents, self.weights)])

    def value_grad_hess(self, y, c):
        """(p_nl_c, gradient, hessian) with respect to y."""
        ex, w = self.exponents[c], self.weights[c]
        if ex.shape[0] == 0:
            return 0.0, np.zeros(self.n), np.zeros((self.n, self.n))
        terms = w * np.exp(ex @ y)
        grad = ex.T @ terms
        hess = (ex.T * terms) @ ex
        return float(terms.sum()), grad, hess


def margin_constraint_values(y, s, tables: NliTables, cfg: SystemConfig):
    """Constraint vector g of the slack formulation; feasible iff all < 0."""
    y = np.asarray(y, dtype=float)
    poly = _NliPolynomial(tables)
    p_ase = ase_powers(cfg)
    req = np.array([cfg.modulation_for(c).snr_req
                    for c in range(1, cfg.grid.num_channels + 1)])
    return np.log(req) + np.log(p_ase + poly.value(y)) - y - s


def _newton(value_grad_hess, z0, domain, settings, tol):
    """Damped Newton with backtracking line search. Returns (z, iters, ok)."""
    z = z0.copy()
    val, grad, hess = value_grad_hess(z)
    for it in range(1, settings.max_inner + 1):
        try:
            step = np.linalg.solve(hess + 1e-12 * np.eye(len(z)), -grad)
        except np.linalg.LinAlgError:
            step = -grad
        decrement = float(-grad @ step)
        if decrement < 0.0:
            step = -grad
            decrement = float(grad @ grad)
        if decrement / 2.0 <= tol:
            return z, it - 1, True
        alpha = 1.0
        slope = float(grad @ step)
        while True:
            cand = z + alpha * step
            if domain(cand):
                cand_val = value_grad_hess(cand, value_only=True)
                if cand_val <= val + settings.ls_accept * alpha * slope:
                    break
            alpha *= settings.ls_shrink
            if alpha < 1e-14:
                return z, it, False
        z = cand
        val, grad, hess = value_grad_hess(z)
        if float(np.linalg.norm(grad)) <= tol:
            return z, it, True
    return z, settings.max_inner, False


def _bound_barrier(y, y_min, y_max):
    lo, hi = y - y_min, y_max - y
    val = -float(np.sum(np.log(lo)) + np.sum(np.log(hi)))
    grad = -1.0 / lo + 1.0 / hi
    hess = np.diag(1.0 / lo**2 + 1.0 / hi**2)
    return val, grad, hess


def solve_min_max_margin(tables: NliTables, cfg: SystemConfig,
                         settings: BarrierSettings = None):
    """Maximize the minimum SNR margin over per-channel launch powers."""
    settings = settings or BarrierSettings()
    n = cfg.grid.num_channels
    poly = _NliPolynomial(tables)
    p_ase = ase_powers(cfg)
    log_req = np.log([cfg.modulation_for(c).snr_req for c in range(1, n + 1)])
    y_min, y_max = np.log(settings.x_min), np.log(settings.x_max)

    def constraints(y, s):
        e = p_ase + poly.value(y)
        return log_req + np.log(e) - y - s

    pad = 0.05 * (y_max - y_min)
    y0 = float(np.clip(np.log(dbm_to_watt(-2.0)), y_min + pad, y_max - pad))
    y = np.full(n, y0)
    s = float(np.max(constraints(y, 0.0))) + 1.0

    def domain(z):
        yv, sv = z[:n], z[n]
        if np.any(yv <= y_min) or np.any(yv >= y_max):
            return False
        return bool(np.all(constraints(yv, sv) < 0.0))

    def make_objective(t):
        def vgh(z, value_only=False):
            yv, sv = z[:n], z[n]
            g = np.empty(n)
            grads = np.zeros((n, n + 1))
            hess = np.zeros((n + 1, n + 1))
            total_grad = np.zeros(n + 1)
            val = t * sv
            total_grad[n] += t
            bval, bgrad, bhess = _bound_barrier(yv, y_min, y_max)
            val += bval
            if not value_only:
                total_grad[:n] += bgrad
                hess[:n, :n] += bhess
            for c in range(n):
                p, p_grad, p_hess = poly.value_grad_hess(yv, c)
                e = p_ase[c] + p
                g_c = log_req[c] + np.log(e) - yv[c] - sv
                g[c] = g_c
                val += -np.log(-g_c)
                if value_only:
                    continue
                dg = np.zeros(n + 1)
                dg[:n] = p_grad / e
                dg[c] -= 1.0
                dg[n] = -1.0
                h_log = p_hess / e - np.outer(p_grad, p_grad) / e**2
                total_grad += dg / (-g_c)
                hess[:n, :n] += h_log / (-g_c)
                hess += np.outer(dg, dg) / g_c**2
            if value_only:
                return val
            return val, total_grad, hess
        return vgh

    z = np.concatenate([y, [s]])
    t = settings.t0
    outer = inner_total = 0
    converged = False
    history = []
    for outer in range(1, settings.max_outer + 1):
        # the barrier objective scales with t, so the Newton stopping
        # tolerance must too; the induced slack error stays ~tol/t
        z, inner, ok = _newton(make_objective(t), z, domain, settings,
                               tol=settings.newton_grad_tol * max(1.0, t))
        inner_total += inner
        history.append({"t": t, "inner": inner, "s": float(z[n])})
        if n / t < settings.duality_gap_tol:
            converged = ok
            break
        t *= settings.t_growth

    y_opt = z[:n]
    allocation = PowerAllocation.from_log(y_opt)
    m = margins(allocation, tables, cfg)
    from .budget import snrs
    return Solution(allocation=allocation, objective=float(m.min()),
                    snr=snrs(allocation, tables, cfg), margins=m,
                    outer_iterations=outer, inner_iterations=inner_total,
                    converged=converged, history=history)


def solve_max_rate(tables: NliTables, cfg: SystemConfig,
                   settings: BarrierSettings = None):
    """Maximize the aggregate rate (high-SNR surrogate, exact re-evaluation)."""
    settings = settings or BarrierSettings()
    n = cfg.grid.num_channels
    poly = _NliPolynomial(tables)
    p_ase = ase_powers(cfg)
    y_min, y_max = np.log(settings.x_min), np.log(settings.x_max)

    def domain(z):
        return bool(np.all(z > y_min) and np.all(z < y_max))

    def make_objective(t):
        def vgh(z, value_only=False):
            bval, bgrad, bhess = _bound_barrier(z, y_min, y_max)
            val = bval
            grad = None if value_only else bgrad.copy()
            hess = None if value_only else bhess.copy()
            for c in range(n):
                p, p_grad, p_hess = poly.value_grad_hess(z, c)
                e = p_ase[c] + p
                val += t * (np.log(e) - z[c])
                if value_only:
                    continue
                dg = p_grad / e
                dg[c] -= 1.0
                grad += t * dg
                hess += t * (p_hess / e - np.outer(p_grad, p_grad) / e**2)
            if value_only:
                return val
            return val, grad, hess
        return vgh

    pad = 0.05 * (y_max - y_min)
    z = np.full(n, float(np.clip(np.log(dbm_to_watt(0.0)),
                                 y_min + pad, y_max - pad)))
    t = settings.t0
    outer = inner_total = 0
    converged = False
    history = []
    for outer in range(1, settings.max_outer + 1):
        z, inner, ok = _newton(make_objective(t), z, domain, settings,
                               tol=settings.newton_grad_tol * max(1.0, t))
        inner_total += inner
        history.append({"t": t, "inner": inner})
        if 2.0 * n / t < settings.duality_gap_tol:
            converged = ok
            break
        t *= settings.t_growth

    allocation = PowerAllocation.from_log(z)
    _, aggregate, _ = total_rate(allocation, tables, cfg, settings.pol_factor)
    from .budget import snrs
    return Solution(allocation=allocation, objective=aggregate,
                    snr=snrs(allocation, tables, cfg),
                    margins=margins(allocation, tables, cfg),
                    outer_iterations=outer, inner_iterations=inner_total,
                    converged=converged, history=history)


def objective_value_and_gradient(problem, y, tables, cfg, s=None,
                                 settings: BarrierSettings = None, t=1.0):
    """Analytic value and gradient of the smooth optimization objectives.

    problem "rate": the high-SNR surrogate sum_c (y_c - log(p_ase + p_nl)),
    gradient with respect to y. problem "margin": the barrier objective
    t*s - sum log(-g_c) at (y, s), gradient with respect to (y, s); power
    bounds excluded so the value is defined wherever g < 0.
    """
    y = np.asarray(y, dtype=float)
    n = cfg.grid.num_channels
    poly = _NliPolynomial(tables)
    p_ase = ase_powers(cfg)
    if problem == "rate":
        val = 0.0
        grad = np.zeros(n)
        for c in range(n):
            p, p_grad, _ = poly.value_grad_hess(y, c)
            e = p_ase[c] + p
            val += y[c] - np.log(e)
            grad -= p_grad / e
            grad[c] += 1.0
        return val, grad
    if problem == "margin":
        if s is None:
            raise ValueError("margin objective needs the slack value s")
        log_req = np.log([cfg.modulation_for(c).snr_req for c in range(1, n + 1)])
        val = t * float(s)
        grad = np.zeros(n + 1)
        grad[n] = t
        for c in range(n):
            p, p_grad, _ = poly.value_grad_hess(y, c)
            e = p_ase[c] + p
            g_c = log_req[c] + np.log(e) - y[c] - s
            if g_c >= 0.0:
                raise ValueError("point is infeasible (g >= 0)")
            val += -np.log(-g_c)
            dg = np.zeros(n + 1)
            dg[:n] = p_grad / e
            dg[c] -= 1.0
            dg[n] = -1.0
            grad += dg / (-g_c)
        return val, grad
    raise ValueError(f"unknown problem {problem!r}")


def _flat_objective(power_dbm, objective, tables, cfg, settings):
    allocation = PowerAllocation.flat(dbm_to_watt(power_dbm), cfg.grid.num_channels)
    if objective == "margin":
        return float(margins(allocation, tables, cfg).min())
    if objective == "rate":
        return total_rate(allocation, tables, cfg, settings.pol_factor)[1]
    raise ValueError(f"unknown objective {objective!r}")


def solve_flat(objective, tables: NliTables, cfg: SystemConfig,
               settings: BarrierSettings = None, grid_step_db=0.25):
    """One common launch power for all channels: bracket then golden section."""
    settings = settings or BarrierSettings()
    lo = float(watt_to_dbm(settings.x_min))
    hi = float(watt_to_dbm(settings.x_max))
    grid = np.arange(lo, hi + grid_step_db / 2, grid_step_db)
    values = np.array([_flat_objective(p, objective, tables, cfg, settings)
                       for p in grid])
    k = int(np.argmax(values))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = _flat_objective(c, objective, tables, cfg, settings)
    fd = _flat_objective(d, objective, tables, cfg, settings)
    while b - a > 1e-4:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = _flat_objective(c, objective, tables, cfg, settings)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = _flat_objective(d, objective, tables, cfg, settings)
    best_dbm = 0.5 * (a + b)
    allocation = PowerAllocation.flat(dbm_to_watt(best_dbm), cfg.grid.num_channels)
    from .budget import snrs
    return Solution(allocation=allocation,
                    objective=_flat_objective(best_dbm, objective, tables, cfg, settings),
                    snr=snrs(allocation, tables, cfg),
                    margins=margins(allocation, tables, cfg),
                    outer_iterations=0, inner_iterations=0, converged=True,
                    history=[{"flat_power_dbm": float(best_dbm)}])
