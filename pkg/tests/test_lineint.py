import numpy as np
import pytest

from egnopt.kernel import KernelContext, mu
from egnopt.lineint import (
    ProductLineIntegral,
    island_integral,
    mu_sq_of_product,
    product_line_integral,
)
from egnopt.tables import _f1_range, _f2_bounds, _product_cap, channel_band
from tests.conftest import table1_config


@pytest.fixture(scope="module")
def setup():
    cfg = table1_config(channels=5)
    ctx = KernelContext.from_fiber(cfg.fiber)
    line = product_line_integral(ctx, _product_cap(cfg))
    return cfg, ctx, line


def test_product_form_matches_kernel(setup):
    cfg, ctx, line = setup
    rng = np.random.default_rng(3)
    f = 193.1e12 + rng.uniform(0, 1e11, 200)
    f1 = f + rng.uniform(-3e10, 3e10, 200)
    f2 = f + rng.uniform(-3e10, 3e10, 200)
    direct = np.abs(mu(f1, f2, f, ctx)) ** 2
    via_product = mu_sq_of_product((f1 - f) * (f2 - f), ctx)
    assert np.allclose(direct, via_product, rtol=1e-12)


def test_antiderivative_is_odd(setup):
    _, _, line = setup
    u = np.array([1e18, 3.7e19, 8e20])
    assert np.allclose(line.antiderivative(-u), -line.antiderivative(u), rtol=1e-14)


def test_window_integral_additivity(setup):
    _, _, line = setup
    a, b, c = 1.0e19, 4.0e19, 9.0e19
    whole = line.window_integral(np.array([a]), np.array([c]))[0]
    parts = (line.window_integral(np.array([a]), np.array([b]))[0]
             + line.window_integral(np.array([b]), np.array([c]))[0])
    assert whole == pytest.approx(parts, rel=1e-9)


def test_window_integral_positive(setup):
    _, _, line = setup
    rng = np.random.default_rng(8)
    lo = rng.uniform(-1e21, 1e21, 50)
    hi = lo + rng.uniform(1e15, 1e20, 50)
    vals = line.window_integral(lo, hi)
    assert np.all(vals > 0.0)


def test_island_against_monte_carlo(setup):
    cfg, ctx, line = setup
    rng = np.random.default_rng(17)
    b3 = channel_band(cfg, 3)
    b2 = channel_band(cfg, 2)
    for ba, bb, bd in [(b3, b3, b3), (b3, b2, b2)]:
        f = 0.5 * (b3[0] + b3[1]) + 3.1e9
        got = island_integral(f, ba, bb, bd, line, 24)
        n = 2_000_000
        lo, hi = _f1_range(f, ba, bb, bd)
        f1 = rng.uniform(lo, hi, n)
        l2, u2 = _f2_bounds(f, f1, bb, bd)
        w = np.maximum(u2 - l2, 0.0)
        f2 = l2 + rng.uniform(0, 1, n) * w
        sample = np.abs(mu(f1, f2, f, ctx)) ** 2 * w * (hi - lo)
        mc = float(sample.mean())
        sigma = float(sample.std() / np.sqrt(n))
        assert abs(got - mc) < max(4 * sigma, 0.01 * mc)


def test_island_refinement_stable(setup):
    cfg, ctx, line = setup
    b3 = channel_band(cfg, 3)
    b1 = channel_band(cfg, 1)
    f = 0.5 * (b3[0] + b3[1]) - 7.7e9
    coarse = island_integral(f, b3, b1, b1, line, 16, transits_per_panel=6.0)
    fine = island_integral(f, b3, b1, b1, line, 32, transits_per_panel=2.0)
    assert coarse == pytest.approx(fine, rel=5e-4)


def test_empty_island_returns_zero(setup):
    cfg, ctx, line = setup
    b3 = channel_band(cfg, 3)
    b1 = channel_band(cfg, 1)
    f = 0.5 * (b3[0] + b3[1])
    # all-pump bands far from the output channel: support is empty
    assert island_integral(f, b1, b1, b1, line, 24) == 0.0


def test_dispersion_free_constant_kernel():
    cfg = table1_config(channels=2)
    ctx = KernelContext.from_fiber(cfg.fiber)
    flat_ctx = KernelContext(two_alpha=ctx.two_alpha, four_pi2_beta2=0.0,
                             gamma=ctx.gamma, span_length=ctx.span_length,
                             num_spans=ctx.num_spans, span_loss=ctx.span_loss)
    line = ProductLineIntegral(flat_ctx, 1e22)
    b1 = channel_band(cfg, 1)
    f = 0.5 * (b1[0] + b1[1])
    got = island_integral(f, b1, b1, b1, line, 24)
    r = cfg.grid.symbol_rate
    f0 = float(mu_sq_of_product(0.0, flat_ctx))
    # constant integrand over the triangle-clipped square
    lo, hi = _f1_range(f, b1, b1, b1)
    f1 = np.linspace(lo, hi, 20001)
    l2, u2 = _f2_bounds(f, f1, b1, b1)
    area = np.trapezoid(np.maximum(u2 - l2, 0.0), f1)
    assert got == pytest.approx(f0 * area, rel=1e-6)
