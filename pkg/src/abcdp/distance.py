"""Distances between the observed and a simulated dataset, with their sensitivity.

Two families are supported:

* ``MMDDistance``: the biased (V-statistic) empirical MMD under a Gaussian
  kernel. The kernel is bounded by 1, so replacing one of the ``N`` observed
  points moves the distance by at most ``2 / N`` and the distance itself never
  exceeds 2.
* ``WeightedL2Distance``: weighted Euclidean distance between summary vectors,
  clipped at ``C``. Its sensitivity is whatever the caller can justify for the
  summary; without a declaration the full clipping range ``C`` is charged.

Datasets are float arrays of shape ``(n, d)``; 1-D input is read as ``d = 1``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial.distance import pdist

logger = logging.getLogger(__name__)

# rows of the left operand per block in kernel sums; bounds peak memory
_BLOCK = 1024
MEDIAN_SUBSAMPLE_CAP = 2000


def as_dataset(points) -> np.ndarray:
    """Coerce ``points`` to a non-empty float array of shape ``(n, d)``."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise ValueError(f"a dataset must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("a dataset needs at least one point of dimension >= 1")
    return arr


def load_dataset_csv(path) -> np.ndarray:
    """Read a headerless CSV with one point per row."""
    return as_dataset(np.loadtxt(path, delimiter=",", ndmin=2))


@dataclass(frozen=True)
class GaussianKernel:
    """``k(x, y) = exp(-||x - y||^2 / (2 l^2))``; bounded by 1 for every ``l``."""

    bandwidth: float
    bound: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"kernel bandwidth must be positive, got {self.bandwidth}")

    def gram_sum(self, x: np.ndarray, y: np.ndarray) -> float:
        """Sum of ``k(x_i, y_j)`` over all pairs, accumulated block by block."""
        scale = -0.5 / self.bandwidth**2
        total = 0.0
        if x.shape[1] == 1:
            yv = y[:, 0]
            for start in range(0, x.shape[0], _BLOCK):
                diff = x[start:start + _BLOCK, 0][:, None] - yv[None, :]
                total += float(np.exp(scale * diff * diff).sum())
            return total
        y_sq = np.einsum("ij,ij->i", y, y)
        for start in range(0, x.shape[0], _BLOCK):
            xb = x[start:start + _BLOCK]
            sq = np.einsum("ij,ij->i", xb, xb)[:, None] + y_sq[None, :] - 2.0 * (xb @ y.T)
            np.maximum(sq, 0.0, out=sq)
            total += float(np.exp(scale * sq).sum())
        return total


def _check_dims(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")


def mmd_squared(x, y, kernel: GaussianKernel) -> float:
    """Biased squared MMD between two samples, diagonal terms included.

    Negative values produced by cancellation are clamped to 0.
    """
    x, y = as_dataset(x), as_dataset(y)
    _check_dims(x, y)
    m, n = x.shape[0], y.shape[0]
    value = (
        kernel.gram_sum(x, x) / m**2
        + kernel.gram_sum(y, y) / n**2
        - 2.0 * kernel.gram_sum(x, y) / (m * n)
    )
    return max(value, 0.0)


def mmd(x, y, kernel: GaussianKernel) -> float:
    return math.sqrt(mmd_squared(x, y, kernel))


def weighted_l2_distance(x, y, summary: Callable, weights, clip: float) -> float:
    """``min(sqrt(sum_j w_j (S_j(x) - S_j(y))^2), clip)``."""
    sx = np.asarray(summary(x), dtype=float).ravel()
    sy = np.asarray(summary(y), dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if not (sx.shape == sy.shape == w.shape):
        raise ValueError(
            f"summary lengths {sx.size}/{sy.size} do not match {w.size} weights"
        )
    return min(math.sqrt(float(np.sum(w * (sx - sy) ** 2))), float(clip))


def median_heuristic_bandwidth(
    pool: Iterable,
    rng: np.random.Generator | None = None,
    cap: int = MEDIAN_SUBSAMPLE_CAP,
) -> float:
    """Median pairwise Euclidean distance over points pooled from simulated data.

    Only pass pseudo-datasets here; the observed data must never be used to
    tune the kernel. When the pool exceeds ``cap`` points a uniform subsample
    of size ``cap`` is drawn with ``rng`` (seed 0 if not given).
    """
    points = np.concatenate([as_dataset(d) for d in pool], axis=0)
    if points.shape[0] < 2:
        raise ValueError("median heuristic needs at least two points")
    if points.shape[0] > cap:
        rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
        idx = rng.choice(points.shape[0], size=cap, replace=False)
        points = points[np.sort(idx)]
    median = float(np.median(pdist(points)))
    if median <= 0.0:
        warnings.warn("all pooled points coincide; falling back to bandwidth 1", RuntimeWarning)
        return 1.0
    return median


class MMDDistance:
    """Empirical MMD with a Gaussian kernel."""

    kind = "mmd"

    def __init__(self, kernel: GaussianKernel):
        self.kernel = kernel

    @property
    def upper_bound(self) -> float:
        return 2.0 * math.sqrt(self.kernel.bound)

    def sensitivity(self, n: int) -> float:
        if n < 1:
            raise ValueError("dataset size must be >= 1")
        return 2.0 * math.sqrt(self.kernel.bound) / n

    def __call__(self, observed, pseudo) -> float:
        return mmd(observed, pseudo, self.kernel)

    def bind(self, observed) -> Callable[[np.ndarray], float]:
        """Return ``pseudo -> rho(observed, pseudo)`` with the observed-only term cached."""
        obs = as_dataset(observed)
        kernel = self.kernel
        n_obs = obs.shape[0]
        self_term = kernel.gram_sum(obs, obs) / n_obs**2

        def rho(pseudo) -> float:
            y = as_dataset(pseudo)
            _check_dims(obs, y)
            n = y.shape[0]
            value = self_term + kernel.gram_sum(y, y) / n**2 - 2.0 * kernel.gram_sum(obs, y) / (n_obs * n)
            return math.sqrt(max(value, 0.0))

        return rho

    def to_dict(self) -> dict:
        return {"kind": "mmd", "bandwidth": self.kernel.bandwidth}

    def __repr__(self):
        return f"MMDDistance(bandwidth={self.kernel.bandwidth!r})"


class WeightedL2Distance:
    """Clipped weighted L2 distance between summary statistics."""

    kind = "weighted_l2"

    def __init__(
        self,
        summary: Callable,
        weights: Sequence[float],
        clip: float,
        declared_sensitivity: float | None = None,
        summary_name: str = "custom",
    ):
        if not clip > 0:
            raise ValueError("clip bound must be positive")
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if declared_sensitivity is not None and not declared_sensitivity > 0:
            raise ValueError("declared sensitivity must be positive")
        self.summary = summary
        self.summary_name = summary_name
        self.weights = w
        self.clip = float(clip)
        self.declared_sensitivity = declared_sensitivity

    @property
    def upper_bound(self) -> float:
        return self.clip

    def sensitivity(self, n: int) -> float:
        # one record may in principle move the clipped distance across [0, C]
        if self.declared_sensitivity is None:
            return self.clip
        return min(float(self.declared_sensitivity), self.clip)

    def __call__(self, observed, pseudo) -> float:
        return weighted_l2_distance(observed, pseudo, self.summary, self.weights, self.clip)

    def bind(self, observed) -> Callable[[np.ndarray], float]:
        s_obs = np.asarray(self.summary(observed), dtype=float).ravel()
        if s_obs.shape != self.weights.shape:
            raise ValueError(
                f"summary length {s_obs.size} does not match {self.weights.size} weights"
            )

        def rho(pseudo) -> float:
            s = np.asarray(self.summary(pseudo), dtype=float).ravel()
            if s.shape != s_obs.shape:
                raise ValueError("summary length changed between datasets")
            return min(math.sqrt(float(np.sum(self.weights * (s - s_obs) ** 2))), self.clip)

        return rho

    def to_dict(self) -> dict:
        return {
            "kind": "weighted_l2",
            "summary": self.summary_name,
            "weights": self.weights.tolist(),
            "clip": self.clip,
            "sensitivity": self.declared_sensitivity,
        }

    def __repr__(self):
        return (
            f"WeightedL2Distance(summary={self.summary_name!r}, clip={self.clip!r}, "
            f"declared_sensitivity={self.declared_sensitivity!r})"
        )


def sensitivity(spec, n: int) -> float:
    """Global sensitivity of ``spec`` for an observed dataset of size ``n``."""
    return spec.sensitivity(n)


def flatten_summary(data) -> np.ndarray:
    """Identity summary: the dataset itself, flattened row-major."""
    return as_dataset(data).ravel()
