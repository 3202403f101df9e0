"""Closed-form error predictions for the private sampler.

Given the realized distances ``rho_t`` (available only when the observed data
is test data), the probability that step ``t`` of the private run disagrees
with plain rejection ABC is ``G_b(|rho_t - eps_abc|)``. Summing these gives a
bound on the expected distance between the two posterior averages of any
function ``f``; a Markov-style argument on the number of flips gives a tail
bound. Both are evaluated here, along with the flip-probability grid used to
choose ``c`` for a given data size and privacy level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .engine import IndicatorTrace, noise_scale_from_budget
from .noise import tail_g

FIG1_N_GRID = (10, 100, 1000)
FIG1_C_GRID = (10, 100, 1000)
FIG1_N_RHO = 100
FIG1_EPSILON_ABC = 0.2


def flip_probability(rho_t, epsilon_abc: float, b: float):
    """``P[private decision != non-private decision]`` at a step with distance ``rho_t``."""
    if b < 0:
        raise ValueError("noise scale must be >= 0")
    gap = np.abs(np.asarray(rho_t, dtype=float) - epsilon_abc)
    if b == 0:
        out = np.zeros_like(gap)
    else:
        out = np.asarray(tail_g(float(b), gap))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FlipProfile:
    rho_values: np.ndarray
    epsilon_abc: float
    b: float

    @property
    def flip_probs(self) -> np.ndarray:
        return np.atleast_1d(flip_probability(self.rho_values, self.epsilon_abc, self.b))

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.rho_values - self.epsilon_abc)


def flip_profile(rho_values, epsilon_abc: float, b: float) -> FlipProfile:
    return FlipProfile(np.asarray(rho_values, dtype=float).ravel(), float(epsilon_abc), float(b))


@dataclass(frozen=True)
class PosteriorFunctional:
    """A test function ``f`` evaluated on the proposal set.

    ``values[t]`` is ``f(theta_t)``; ``k_max`` is ``max_t ||f(theta_t)||_2``.
    """

    values: np.ndarray

    @property
    def k_max(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    @classmethod
    def from_thetas(cls, thetas, f: Callable | None = None) -> "PosteriorFunctional":
        rows = [np.atleast_1d(np.asarray(f(th) if f is not None else th, dtype=float)) for th in thetas]
        return cls(np.vstack(rows))


def expected_error_bound(profile: FlipProfile, functional: PosteriorFunctional | float, c_prime: int) -> float:
    """``(2 K / c') * sum_t G_b(|rho_t - eps_abc|)``."""
    if c_prime < 1:
        raise ValueError("the bound is undefined without at least one non-private acceptance")
    k = functional if isinstance(functional, (int, float)) else functional.k_max
    return 2.0 * k / c_prime * float(np.sum(profile.flip_probs))


def tail_error_bound(profile: FlipProfile, functional: PosteriorFunctional | float, c_prime: int, a: float) -> float:
    """Lower bound on ``P(error <= a)``, floored at 0."""
    if not a > 0:
        raise ValueError("a must be positive")
    if c_prime < 1:
        raise ValueError("the bound is undefined without at least one non-private acceptance")
    k = functional if isinstance(functional, (int, float)) else functional.k_max
    if profile.b == 0:
        mass = 0.0
    else:
        with np.errstate(under="ignore"):
            mass = float(np.sum(np.exp(-profile.gaps / (2.0 * profile.b))))
    return max(0.0, 1.0 - 4.0 * k / (3.0 * a * c_prime) * mass)


def tail_bound_scale(profile: FlipProfile, functional: PosteriorFunctional | float, c_prime: int) -> float:
    """The ``A`` in ``tail_error_bound = max(0, 1 - A / a)``."""
    k = functional if isinstance(functional, (int, float)) else functional.k_max
    if profile.b == 0:
        return 0.0
    with np.errstate(under="ignore"):
        mass = float(np.sum(np.exp(-profile.gaps / (2.0 * profile.b))))
    return 4.0 * k / (3.0 * c_prime) * mass


def realized_error(
    functional: PosteriorFunctional,
    private: IndicatorTrace | np.ndarray,
    public: IndicatorTrace | np.ndarray,
) -> float | None:
    """``||mean f over private acceptances - mean f over public acceptances||_2``.

    Returns ``None`` when either run accepted nothing.
    """
    total = functional.values.shape[0]
    tp = private.padded(total) if isinstance(private, IndicatorTrace) else np.asarray(private)
    tq = public.padded(total) if isinstance(public, IndicatorTrace) else np.asarray(public)
    c, c_prime = int(tp.sum()), int(tq.sum())
    if c == 0 or c_prime == 0:
        return None
    diff = functional.values.T @ tp / c - functional.values.T @ tq / c_prime
    return float(np.linalg.norm(diff))


@dataclass
class ErrorBoundReport:
    expected_error_bound: float
    tail_scale: float
    realized_error: float | None
    c: int
    c_prime: int

    def tail_bound(self, a: float) -> float:
        if not a > 0:
            raise ValueError("a must be positive")
        return max(0.0, 1.0 - self.tail_scale / a)

    def to_dict(self) -> dict:
        return {
            "expected_error_bound": self.expected_error_bound,
            "tail_scale": self.tail_scale,
            "realized_error": self.realized_error,
            "c": self.c,
            "c_prime": self.c_prime,
        }


def error_bound_report(
    profile: FlipProfile,
    functional: PosteriorFunctional,
    private: IndicatorTrace,
    public: IndicatorTrace,
) -> ErrorBoundReport:
    c_prime = public.n_accepted
    if c_prime < 1:
        raise ValueError("non-private run accepted nothing; the bounds do not apply")
    return ErrorBoundReport(
        expected_error_bound=expected_error_bound(profile, functional, c_prime),
        tail_scale=tail_bound_scale(profile, functional, c_prime),
        realized_error=realized_error(functional, private, public),
        c=private.n_accepted,
        c_prime=c_prime,
    )


def default_epsilon_grid(n_points: int = 25) -> np.ndarray:
    """Log-uniform privacy levels over ``[0.1, 100]``."""
    return np.logspace(-1.0, 2.0, n_points)


def default_rho_samples(rng: np.random.Generator, n: int = FIG1_N_RHO) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=n)


def flip_profile_grid(
    rho_samples: Sequence[float],
    epsilon_abc: float,
    n_grid: Sequence[int],
    c_grid: Sequence[int],
    eps_total_grid: Sequence[float],
    resample: bool,
    kernel_bound: float = 1.0,
) -> list[dict]:
    """Mean flip probability for every ``(N, c, eps_total)`` cell, MMD sensitivity assumed.

    Rows come out ordered by ``N``, then ``c``, then ``eps_total`` as given.
    """
    if not (len(n_grid) and len(c_grid) and len(eps_total_grid)):
        raise ValueError("grids must be nonempty")
    rho = np.asarray(rho_samples, dtype=float)
    rows = []
    for n in n_grid:
        delta_rho = 2.0 * math.sqrt(kernel_bound) / n
        for c in c_grid:
            for eps in eps_total_grid:
                b = noise_scale_from_budget(eps, c, resample, delta_rho)
                rows.append(
                    {
                        "N": int(n),
                        "c": int(c),
                        "epsilon_total": float(eps),
                        "mean_flip_prob": float(np.mean(flip_probability(rho, epsilon_abc, b))),
                    }
                )
    return rows
