"""Multi-span four-wave-mixing link kernel.

The kernel mu(f1, f2, f) collects the per-span nonlinear transfer of a
lumped-amplified link of identical spans: a single-span factor, the
phased-array (Dirichlet) accumulation over spans, and the mid-link phase
offset. It depends on the frequencies only through the phase-matching
product (f1 - f)*(f2 - f).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FiberParams

# Half-width of the guard interval around multiples of pi where the
# Dirichlet ratio switches to its L'Hopital branch.
SIN_GUARD = 1e-9


@dataclass(frozen=True)
class KernelContext:
    two_alpha: float  # 1/m
    four_pi2_beta2: float  # s^2 prefactor 4*pi^2*beta2
    gamma: float  # 1/(W*m)
    span_length: float  # m
    num_spans: int
    span_loss: float  # exp(-2*alpha*Ls)

    @classmethod
    def from_fiber(cls, fiber: FiberParams):
        two_alpha = 2.0 * fiber.alpha_field
        return cls(
            two_alpha=two_alpha,
            four_pi2_beta2=4.0 * np.pi**2 * fiber.beta2,
            gamma=fiber.gamma,
            span_length=fiber.span_length,
            num_spans=fiber.num_spans,
            span_loss=float(np.exp(-two_alpha * fiber.span_length)),
        )


def _dirichlet_ratio(x, ns):
    """sin(ns*x)/sin(x) with the removable singularities at x = k*pi guarded."""
    x = np.asarray(x, dtype=float)
    x_mod = x - np.pi * np.round(x / np.pi)
    near = np.abs(x_mod) < SIN_GUARD
    safe = np.where(near, 1.0, np.sin(x))
    ratio = np.sin(ns * x) / safe
    # L'Hopital branch: ns*cos(ns*x)/cos(x), exact at the singular points.
    limit = ns * np.cos(ns * x) / np.cos(x)
    return np.where(near, limit, ratio)


def phased_array_power(x, ns):
    """|sin(ns*x)/sin(x)|^2, total on the reals; ns^2 at multiples of pi."""
    if ns < 1:
        raise ValueError("ns must be >= 1")
    r = _dirichlet_ratio(x, ns)
    return r * r


def _reduced_half_phase(theta, ls):
    """Half the per-span phase, folded into (-pi/2, pi/2].

    Folding x by multiples of pi flips the sign of both sin(ns*x)/sin(x)
    and e^{j x (ns-1)} by the same (-1)^(m*(ns-1)), so their product is
    exactly invariant; working with the small residual keeps sin(ns*x)
    accurate when the accumulated phase is millions of radians.
    """
    x = 0.5 * theta * ls
    return x - np.pi * np.round(x / np.pi)


def mu(f1, f2, f, ctx: KernelContext):
    """Complex link kernel for frequency triple (f1, f2, f). Units 1/W.

    Vectorized over numpy-broadcastable frequency arrays.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    f = np.asarray(f, dtype=float)
    delta = (f1 - f) * (f2 - f)
    theta = ctx.four_pi2_beta2 * delta  # 1/s^... rad per metre
    ls = ctx.span_length
    # Single-span factor: integral of e^{-2 alpha z} e^{j theta z} over the span.
    span = (1.0 - ctx.span_loss * np.exp(1j * theta * ls)) / (ctx.two_alpha - 1j * theta)
    # Coherent accumulation over ns identical spans.
    x = _reduced_half_phase(theta, ls)
    array = _dirichlet_ratio(x, ctx.num_spans) * np.exp(1j * x * (ctx.num_spans - 1))
    return ctx.gamma * span * array


def mu_span_sum_oracle(f1, f2, f, ctx: KernelContext):
    """Brute-force per-span coherent sum; independent check for mu()."""
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    f = np.asarray(f, dtype=float)
    theta = ctx.four_pi2_beta2 * ((f1 - f) * (f2 - f))
    ls = ctx.span_length
    span = (1.0 - np.exp((-ctx.two_alpha + 1j * theta) * ls)) / (ctx.two_alpha - 1j * theta)
    x = _reduced_half_phase(theta, ls)
    total = np.zeros(np.broadcast(f1, f2, f).shape, dtype=complex)
    for k in range(ctx.num_spans):
        total = total + np.exp(2j * x * k)
    return ctx.gamma * span * total
