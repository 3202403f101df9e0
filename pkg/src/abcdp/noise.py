"""Laplace sampling and the law of the threshold-minus-distance noise.

The private acceptance test compares ``rho + nu`` against ``eps_abc + m`` with
``m ~ Lap(b)`` and ``nu ~ Lap(2b)``. Everything about how often the private
and non-private decisions disagree follows from the distribution of
``Z = m - nu``, whose density, upper tail and CDF are available in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike


def sample_laplace(scale: float, rng: np.random.Generator, size: int | None = None):
    """Draw from a zero-mean Laplace distribution by inverting its CDF.

    A scale of exactly 0 is the "no noise" sentinel: zeros are returned and
    the generator is left untouched, so a run with infinite privacy budget
    consumes no randomness.

    Args:
        scale: Laplace scale ``b >= 0``.
        rng: Source of uniforms.
        size: ``None`` for a Python float, otherwise the number of draws.

    Returns:
        A float, or a float64 array of length ``size``.
    """
    scale = float(scale)
    if not scale >= 0.0 or math.isinf(scale):
        raise ValueError(f"Laplace scale must be finite and >= 0, got {scale}")
    if scale == 0.0:
        return 0.0 if size is None else np.zeros(size)
    if size is None:
        # same single uniform as the array path, without the array overhead
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return scale * math.log(2.0 * u) if u < 0.5 else -scale * math.log(2.0 * (1.0 - u))
    n = int(size)
    u = rng.random(n)
    # random() is on [0, 1); 0 maps to -inf under the inverse CDF
    while not u.all():
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    draws = np.where(
        u < 0.5,
        scale * np.log(2.0 * u),
        -scale * np.log(2.0 * (1.0 - u)),
    )
    return draws


@dataclass(frozen=True)
class NoiseDiffDistribution:
    """Distribution of ``Z = m - nu`` with ``m ~ Lap(b)`` and ``nu ~ Lap(2b)``."""

    b: float

    def __post_init__(self):
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError(f"noise-difference law needs a finite scale b > 0, got {self.b}")

    def pdf(self, z: ArrayLike):
        return pdf_z(self, z)

    def tail(self, a: ArrayLike):
        return tail_g(self, a)

    def cdf(self, a: ArrayLike):
        return cdf_z(self, a)


def _unwrap(value: ArrayLike):
    arr = np.asarray(value, dtype=float)
    return arr, arr.ndim == 0


def _wrap(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def _as_dist(dist: NoiseDiffDistribution | float) -> NoiseDiffDistribution:
    if isinstance(dist, NoiseDiffDistribution):
        return dist
    return NoiseDiffDistribution(float(dist))


def pdf_z(dist: NoiseDiffDistribution | float, z: ArrayLike):
    """Density ``(1/6b) [2 exp(-|z|/2b) - exp(-|z|/b)]``."""
    dist = _as_dist(dist)
    b = dist.b
    arr, scalar = _unwrap(z)
    x = np.abs(arr)
    with np.errstate(under="ignore"):
        out = (2.0 * np.exp(-x / (2.0 * b)) - np.exp(-x / b)) / (6.0 * b)
    return _wrap(out, scalar)


def _tail(b: float, a: np.ndarray) -> np.ndarray:
    with np.errstate(under="ignore"):
        return (4.0 * np.exp(-a / (2.0 * b)) - np.exp(-a / b)) / 6.0


def tail_g(dist: NoiseDiffDistribution | float, a: ArrayLike):
    """Upper tail ``P(Z > a) = (1/6) [4 exp(-a/2b) - exp(-a/b)]`` for ``a >= 0``.

    Equals 1/2 at ``a = 0`` and decreases strictly to 0.
    """
    dist = _as_dist(dist)
    arr, scalar = _unwrap(a)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise ValueError("tail_g is defined for a >= 0 only")
    return _wrap(_tail(dist.b, arr), scalar)


def cdf_z(dist: NoiseDiffDistribution | float, a: ArrayLike):
    """CDF ``H[a] + (1 - 2 H[a]) G_b(|a|)`` with ``H[0] = 1``."""
    dist = _as_dist(dist)
    arr, scalar = _unwrap(a)
    step = (arr >= 0.0).astype(float)
    out = step + (1.0 - 2.0 * step) * _tail(dist.b, np.abs(arr))
    return _wrap(out, scalar)
