"""Fast, spike-resolving evaluation of the main-term island integrals.

|mu(f1, f2, f)|^2 depends on the frequencies only through the
phase-matching product u = (f1 - f)(f2 - f). The multi-span phased-array
factor makes it a comb of narrow resonances in u (spacing pi in the
half-phase 2*pi^2*beta2*Ls*u, width ~1/Ns of that), which plain tensor
quadrature cannot resolve at realistic orders. Instead we tabulate the
1-D antiderivative of F(u) = |mu|^2(u) once per link on a grid fine
enough to resolve every ripple, and evaluate inner integrals over f2 as
antiderivative differences. The outer f1 integral is segmented so that at
most ~one resonance transits the inner window per segment.
"""

from __future__ import annotations

import functools

import numpy as np

from .kernel import KernelContext, _dirichlet_ratio


def mu_sq_of_product(u, ctx: KernelContext):
    """|mu|^2 as a function of the product u = (f1 - f)(f2 - f), Hz^2."""
    u = np.asarray(u, dtype=float)
    theta = ctx.four_pi2_beta2 * u
    ls = ctx.span_length
    num = 1.0 + ctx.span_loss**2 - 2.0 * ctx.span_loss * np.cos(theta * ls)
    den = ctx.two_alpha**2 + theta**2
    ratio = _dirichlet_ratio(0.5 * theta * ls, ctx.num_spans)
    return ctx.gamma**2 * num / den * ratio**2


class ProductLineIntegral:
    """Tabulated antiderivative of |mu|^2 along the phase-matching product.

    F(u) is even in u, so only u >= 0 is stored; the antiderivative is
    extended as an odd function.
    """

    # resolution: grid cells per resonance ripple (ripple period in the
    # half-phase x = 2*pi^2*|beta2|*Ls*u is pi/Ns)
    CELLS_PER_RIPPLE = 4
    GL_PER_CELL = 3
    DIRECT_WINDOW_CELLS = 8  # below this many cells, integrate directly

    def __init__(self, ctx: KernelContext, u_max: float):
        self.ctx = ctx
        self.u_max = float(u_max)
        c1 = abs(2.0 * np.pi**2 * ctx.four_pi2_beta2 / (4.0 * np.pi**2)
                 * ctx.span_length)  # |2 pi^2 beta2 Ls|, rad per Hz^2
        self.c1 = c1
        if c1 == 0.0:
            # dispersion-free link: F is constant
            self.cell_width = self.u_max
            self.edges = np.array([0.0, self.u_max])
            f0 = float(mu_sq_of_product(0.0, ctx))
            self.cum = np.array([0.0, f0 * self.u_max])
            return
        ripple = np.pi / (ctx.num_spans * c1)  # ripple period in u
        self.cell_width = ripple / self.CELLS_PER_RIPPLE
        n_cells = int(np.ceil(self.u_max / self.cell_width))
        n_cells = min(max(n_cells, 16), 3_000_000)
        self.cell_width = self.u_max / n_cells
        self.edges = np.linspace(0.0, self.u_max, n_cells + 1)
        gx, gw = np.polynomial.legendre.leggauss(self.GL_PER_CELL)
        half = 0.5 * self.cell_width
        centers = self.edges[:-1] + half
        pts = centers[:, None] + half * gx[None, :]
        vals = mu_sq_of_product(pts.ravel(), ctx).reshape(pts.shape)
        cell_ints = half * (vals @ gw)
        self.cum = np.concatenate([[0.0], np.cumsum(cell_ints)])

    def antiderivative(self, u):
        """Odd-extended antiderivative of F at u (linear within cells)."""
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        a = np.minimum(a, self.u_max)
        idx = np.clip((a / self.cell_width).astype(int), 0, len(self.cum) - 2)
        frac = (a - self.edges[idx]) / self.cell_width
        val = self.cum[idx] + frac * (self.cum[idx + 1] - self.cum[idx])
        return np.sign(u) * val

    def window_integral(self, lo, hi):
        """integral of F over [lo, hi] in u, vectorized over windows."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        res = self.antiderivative(hi) - self.antiderivative(lo)
        narrow = (hi - lo) < self.DIRECT_WINDOW_CELLS * self.cell_width
        if np.any(narrow):
            gx, gw = np.polynomial.legendre.leggauss(8)
            l_n, h_n = lo[narrow], hi[narrow]
            half = 0.5 * (h_n - l_n)
            pts = (l_n + half)[:, None] + half[:, None] * gx[None, :]
            direct = half * (mu_sq_of_product(pts.ravel(), self.ctx)
                             .reshape(pts.shape) @ gw)
            res = np.array(res, dtype=float)
            res[narrow] = direct
        return res


@functools.lru_cache(maxsize=8)
def product_line_integral(ctx: KernelContext, u_max: float):
    return ProductLineIntegral(ctx, u_max)


def island_integral(f, ba, bb, bd, line: ProductLineIntegral, order,
                    transits_per_panel=4.0):
    """integral of |mu(f1, f2, f)|^2 over the island
    {f1 in ba, f2 in bb, f1 + f2 - f in bd} at fixed output frequency f.

    The f2 integral becomes an antiderivative difference in u; the f1 axis
    is split at the interval kinks and subdivided into Gauss-Legendre
    panels sized so that at most `transits_per_panel` resonances sweep
    through the inner window per panel (a panel of `order` points resolves
    a handful of such transits).
    """
    lo = max(ba[0], f + bd[0] - bb[1])
    hi = min(ba[1], f + bd[1] - bb[0])
    if hi <= lo:
        return 0.0
    breaks = sorted({lo, hi} | {p for p in (f + bd[0] - bb[0], f + bd[1] - bb[1])
                                if lo < p < hi})
    total = 0.0
    ripple = (np.pi / (line.ctx.num_spans * line.c1)) if line.c1 > 0 else np.inf
    for s0, s1 in zip(breaks[:-1], breaks[1:]):
        # max |d(u-edge)/d f1| over the segment bounds the transit count
        edge = max(abs(bb[0] - f), abs(bb[1] - f),
                   abs(bd[0]), abs(bd[1]), abs(s0 - f) + abs(s1 - f))
        n_seg = 1
        if np.isfinite(ripple):
            transits = (s1 - s0) * edge / ripple
            n_seg = int(np.ceil(transits / transits_per_panel))
            n_seg = min(max(n_seg, 1), 20000)
        sub = np.linspace(s0, s1, n_seg + 1)
        gx, gw = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (sub[1] - sub[0])
        f1 = (sub[:-1] + half)[:, None] + half * gx[None, :]
        f1 = f1.ravel()
        w = np.tile(half * gw, n_seg)
        nu1 = f1 - f
        l2 = np.maximum(bb[0], f + bd[0] - f1) - f
        u2 = np.minimum(bb[1], f + bd[1] - f1) - f
        a = nu1 * l2
        b = nu1 * u2
        u_lo = np.minimum(a, b)
        u_hi = np.maximum(a, b)
        inner = np.empty_like(nu1)
        tiny = np.abs(nu1) < 1e-6 * max(abs(lo - f), abs(hi - f), 1.0)
        safe = ~tiny
        if np.any(safe):
            inner[safe] = (line.window_integral(u_lo[safe], u_hi[safe])
                           / np.abs(nu1[safe]))
        if np.any(tiny):
            mid = 0.5 * (l2[tiny] + u2[tiny]) * nu1[tiny]
            inner[tiny] = (mu_sq_of_product(mid, line.ctx)
                           * np.maximum(u2[tiny] - l2[tiny], 0.0))
        total += float(np.dot(w, inner))
    return total
