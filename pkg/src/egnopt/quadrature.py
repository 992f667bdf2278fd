"""Numerical integration engine behind the lookup-table construction.

2-D integrals use tensor Gauss-Legendre; 3-D and 4-D integrals use
deterministic scrambled-Sobol quasi-Monte Carlo with the error estimated
from randomized replicates. Everything is reproducible from a base seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


class QuadratureError(RuntimeError):
    """Raised when an integral cannot be brought below the target tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    order_2d: int = 24  # tensor Gauss-Legendre order per axis
    samples_3d: int = 32768  # QMC sample count per replicate
    samples_4d: int = 65536
    outer_order: int = 12  # Gauss-Legendre order for the outer frequency axis
    replicates: int = 4  # randomized QMC replicates for error estimation
    max_doublings: int = 3  # QMC budget doublings before giving up
    base_seed: int = 20240901
    target_rel_tol: float = 0.01

    def __post_init__(self):
        if self.order_2d < 8:
            raise ValueError("order_2d must be >= 8")
        if self.samples_3d < 10_000 or self.samples_4d < 10_000:
            raise ValueError("QMC sample counts must be >= 10^4")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates for an error estimate")

    def digest(self):
        blob = repr((self.order_2d, self.samples_3d, self.samples_4d,
                     self.outer_order, self.replicates, self.max_doublings,
                     self.base_seed, self.target_rel_tol)).encode()
        return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def derive_seed(base_seed, *tags):
    """Deterministic per-entry seed from (base_seed, tags...)."""
    blob = repr((int(base_seed),) + tuple(tags)).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def gauss_legendre(a, b, order):
    """Nodes and weights for [a, b]."""
    x, w = np.polynomial.legendre.leggauss(int(order))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _tensor_gl(box, order):
    axes = [gauss_legendre(lo, hi, order) for lo, hi in box]
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    weight = np.ones([order] * len(box))
    for dim, ax in enumerate(axes):
        shape = [1] * len(box)
        shape[dim] = order
        weight = weight * ax[1].reshape(shape)
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return pts, weight.ravel()


def _qmc_estimate(func, box, n, seed, replicates):
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    volume = float(np.prod(hi - lo))
    dim = box.shape[0]
    values = np.empty(replicates)
    for r in range(replicates):
        sampler = qmc.Sobol(d=dim, scramble=True, seed=derive_seed(seed, "rep", r))
        u = sampler.random(n)
        pts = lo + u * (hi - lo)
        values[r] = np.mean(func(pts)) * volume
    value = float(np.mean(values))
    err = float(np.std(values, ddof=1) / np.sqrt(replicates))
    return value, err


def integrate(dimension, func, box, spec: QuadratureSpec, seed=None):
    """Integrate func over a finite box. Returns (value, error_estimate).

    func takes an (n, dimension) array of points and returns n values.
    2-D goes through tensor Gauss-Legendre (error from an order refinement);
    3-D/4-D through scrambled-Sobol QMC with replicate-based errors and the
    sample budget doubled until the target relative tolerance is met.
    """
    box = list(box)
    if len(box) != dimension:
        raise ValueError("box does not match dimension")
    if seed is None:
        seed = spec.base_seed
    if dimension == 2:
        pts, w = _tensor_gl(box, spec.order_2d)
        value = float(np.dot(np.asarray(func(pts), dtype=float), w))
        pts2, w2 = _tensor_gl(box, spec.order_2d + 8)
        refined = float(np.dot(np.asarray(func(pts2), dtype=float), w2))
        return refined, abs(refined - value)
    if dimension in (3, 4):
        n = spec.samples_3d if dimension == 3 else spec.samples_4d
        for attempt in range(spec.max_doublings + 1):
            value, err = _qmc_estimate(func, box, n, derive_seed(seed, "n", n),
                                       spec.replicates)
            scale = max(abs(value), 1e-300)
            if err / scale <= spec.target_rel_tol:
                return value, err
            n *= 2
        return value, err
    raise ValueError(f"unsupported dimension {dimension}")


def qmc_mean(func, n, dim, seed, replicates):
    """Replicated scrambled-Sobol mean of func over the unit cube.

    func takes an (n, dim) array in [0, 1)^dim and returns n values
    (which may already include a Jacobian weight). Returns (mean, err).
    """
    values = np.empty(replicates)
    for r in range(replicates):
        sampler = qmc.Sobol(d=dim, scramble=True, seed=derive_seed(seed, "rep", r))
        values[r] = np.mean(func(sampler.random(n)))
    return float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(replicates))
