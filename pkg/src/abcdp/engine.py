"""Rejection ABC and its differentially private sparse-vector variant.

The private run perturbs the acceptance threshold with ``m ~ Lap(b)`` and each
distance with ``nu_t ~ Lap(2b)``, accepts when ``rho_t + nu_t <= eps_abc + m``
and stops after ``c`` acceptances. With ``resample=True`` the threshold noise
is redrawn after every acceptance; otherwise it is drawn once per run. The
scale ``b`` is set so that the whole indicator sequence is ``eps_total``-DP
under linear composition:

    resample=False:  eps_total = (c + 1) * delta_rho / b
    resample=True:   eps_total = 2 * c * delta_rho / b

``eps_total = inf`` maps to ``b = 0``, which turns the private run into plain
rejection ABC with early stopping at ``c``, bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distance import as_dataset
from .noise import sample_laplace


class AccountingError(RuntimeError):
    """The noise scale and the claimed privacy budget disagree."""


@dataclass(frozen=True)
class ProposalRecord:
    """One public parameter / pseudo-dataset pair; ``index`` counts from 1."""

    index: int
    theta: np.ndarray
    pseudo_data: np.ndarray


def _check_epsilon(epsilon_total: float) -> float:
    eps = float(epsilon_total)
    if math.isnan(eps) or eps <= 0.0:
        raise ValueError(f"epsilon_total must be > 0 (or inf), got {epsilon_total}")
    return eps


def noise_scale_from_budget(epsilon_total: float, c: int, resample: bool, delta_rho: float) -> float:
    """Laplace scale ``b`` that makes ``c`` accepted answers cost ``epsilon_total``."""
    eps = _check_epsilon(epsilon_total)
    if int(c) != c or c < 1:
        raise ValueError(f"c must be a positive integer, got {c}")
    if not (delta_rho > 0 and math.isfinite(delta_rho)):
        raise ValueError(f"sensitivity must be positive and finite, got {delta_rho}")
    if math.isinf(eps):
        return 0.0
    if resample:
        return 2.0 * c * delta_rho / eps
    return (c + 1) * delta_rho / eps


def epsilon_from_scale(b: float, c: int, resample: bool, delta_rho: float) -> float:
    """Invert :func:`noise_scale_from_budget`; ``b = 0`` costs ``inf``."""
    if b < 0:
        raise ValueError("noise scale must be >= 0")
    if b == 0:
        return math.inf
    if resample:
        return 2.0 * c * delta_rho / b
    return (c + 1) * delta_rho / b


@dataclass(frozen=True)
class PrivacyBudget:
    """Total privacy loss, acceptance quota and the derived Laplace scale."""

    epsilon_total: float
    c: int
    resample: bool
    delta_rho: float
    b: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "b", noise_scale_from_budget(self.epsilon_total, self.c, self.resample, self.delta_rho)
        )

    @property
    def private(self) -> bool:
        return self.b > 0.0


def accountant_report(budget: PrivacyBudget, delta_rho: float | None = None) -> dict:
    """Ledger for a budget, after re-deriving ``epsilon_total`` from ``b``.

    Raises:
        AccountingError: if the round trip misses by more than ``1e-12``
            (relative), or if ``delta_rho`` differs from the budget's own.
    """
    delta_rho = budget.delta_rho if delta_rho is None else float(delta_rho)
    if not math.isclose(delta_rho, budget.delta_rho, rel_tol=1e-12, abs_tol=0.0):
        raise AccountingError(
            f"budget calibrated for sensitivity {budget.delta_rho}, ledger asked for {delta_rho}"
        )
    spent = epsilon_from_scale(budget.b, budget.c, budget.resample, delta_rho)
    claimed = float(budget.epsilon_total)
    if math.isinf(claimed) or math.isinf(spent):
        ok = math.isinf(claimed) and math.isinf(spent)
    else:
        ok = abs(spent - claimed) <= 1e-12 * max(1.0, abs(claimed))
    if not ok:
        raise AccountingError(f"noise scale {budget.b} spends {spent}, budget claims {claimed}")
    return {
        "epsilon_total": spent,
        "c": int(budget.c),
        "resample": bool(budget.resample),
        "b": budget.b,
        "delta_rho": delta_rho,
        "composition": "linear",
        "note": "the full budget is charged even when fewer than c samples are accepted",
    }


@dataclass
class IndicatorTrace:
    """Binary decisions for the steps actually executed.

    ``accepted_indices`` are 1-based, like proposal indices. ``noise_log`` is
    only filled on request and holds ``(threshold_noise, distance_noise)`` per
    step; it must never leave a test harness.
    """

    indicators: np.ndarray
    accepted_indices: np.ndarray
    terminated_early: bool
    noise_log: list[tuple[float, float]] | None = None

    @property
    def n_accepted(self) -> int:
        return int(self.accepted_indices.size)

    @property
    def n_steps(self) -> int:
        return int(self.indicators.size)

    def padded(self, total: int) -> np.ndarray:
        """Indicators extended with zeros to length ``total``."""
        out = np.zeros(total, dtype=np.int8)
        out[: self.indicators.size] = self.indicators
        return out

    def same_as(self, other: "IndicatorTrace") -> bool:
        return (
            np.array_equal(self.indicators, other.indicators)
            and np.array_equal(self.accepted_indices, other.accepted_indices)
            and self.terminated_early == other.terminated_early
        )


@dataclass
class AbcResult:
    trace: IndicatorTrace
    accepted_thetas: np.ndarray
    posterior_mean: np.ndarray | None
    distances: np.ndarray | None = None
    budget: PrivacyBudget | None = None

    @property
    def has_posterior(self) -> bool:
        return self.posterior_mean is not None


def _trace_from_accepts(accepts: list[int], n_total: int, c: int | None) -> IndicatorTrace:
    accepted = np.asarray(accepts, dtype=np.int64)
    if c is not None and accepted.size >= c:
        last = int(accepted[c - 1])
        accepted = accepted[:c]
        n_steps = last + 1
    else:
        n_steps = n_total
    indicators = np.zeros(n_steps, dtype=np.int8)
    indicators[accepted] = 1
    return IndicatorTrace(
        indicators=indicators,
        accepted_indices=accepted + 1,
        terminated_early=n_steps < n_total,
    )


def rejection_indicators(distances: Sequence[float], epsilon_abc: float, c_stop: int | None = None) -> IndicatorTrace:
    """Accept step ``t`` iff ``rho_t <= epsilon_abc``; optionally stop after ``c_stop``."""
    rho = np.asarray(distances, dtype=float)
    if c_stop is not None and c_stop < 1:
        raise ValueError("c_stop must be >= 1")
    hits = np.flatnonzero(rho <= epsilon_abc).tolist()
    return _trace_from_accepts(hits, rho.size, c_stop)


def sparse_vector_indicators(
    distances: Sequence[float],
    epsilon_abc: float,
    c: int,
    b: float,
    resample: bool,
    rng: np.random.Generator,
    record_noise: bool = False,
) -> IndicatorTrace:
    """The private acceptance pass over precomputed distances.

    Draw order: all distance noises ``nu_1..nu_T`` first (scale ``2b``), then
    the threshold noise, then one fresh threshold noise after every acceptance
    when ``resample`` is set.
    """
    rho = np.asarray(distances, dtype=float)
    total = rho.size
    if total == 0:
        raise ValueError("no proposals to test")
    if int(c) != c or c < 1:
        raise ValueError("c must be a positive integer")
    nu = sample_laplace(2.0 * b, rng, size=total)
    noisy = rho + nu
    m = sample_laplace(b, rng)
    thresholds = [m] if record_noise else None

    accepts: list[int] = []
    pos = 0
    while pos < total and len(accepts) < c:
        below = noisy[pos:] <= epsilon_abc + m
        if resample:
            k = int(np.argmax(below))
            if not below[k]:
                break
            accepts.append(pos + k)
            pos += k + 1
            m = sample_laplace(b, rng)
            if record_noise:
                thresholds.append(m)
        else:
            hits = np.flatnonzero(below)[: c - len(accepts)]
            accepts.extend((pos + hits).tolist())
            break

    trace = _trace_from_accepts(accepts, total, c)
    if record_noise:
        log = []
        block = 0
        for t in range(trace.n_steps):
            log.append((float(thresholds[block]), float(nu[t])))
            if resample and trace.indicators[t]:
                block += 1
        trace.noise_log = log
    return trace


def _bind(distance, observed) -> Callable[[np.ndarray], float]:
    if hasattr(distance, "bind"):
        return distance.bind(observed)
    return lambda pseudo: distance(observed, pseudo)


def compute_distances(proposals: Sequence[ProposalRecord], observed, distance) -> np.ndarray:
    """``rho(observed, Y_t)`` for every proposal, in proposal order."""
    rho = _bind(distance, as_dataset(observed))
    return np.array([rho(rec.pseudo_data) for rec in proposals], dtype=float)


def _check_proposals(proposals: Sequence[ProposalRecord]) -> None:
    if len(proposals) == 0:
        raise ValueError("empty proposal sequence")
    for expected, rec in enumerate(proposals, start=1):
        if rec.index != expected:
            raise ValueError(f"proposal indices must run 1..T, found {rec.index} at position {expected}")


def _result(proposals, trace, distances, budget) -> AbcResult:
    thetas = np.array([np.asarray(proposals[i - 1].theta, dtype=float) for i in trace.accepted_indices])
    if thetas.size == 0:
        dim = np.asarray(proposals[0].theta).size
        thetas = np.empty((0, dim))
        mean = None
    else:
        mean = thetas.mean(axis=0)
    return AbcResult(trace=trace, accepted_thetas=thetas, posterior_mean=mean, distances=distances, budget=budget)


def run_rejection_abc(
    proposals: Sequence[ProposalRecord],
    observed,
    distance,
    epsilon_abc: float,
    c_stop: int | None = None,
    distances: np.ndarray | None = None,
) -> AbcResult:
    """Non-private rejection ABC; the result keeps every ``rho_t``."""
    _check_proposals(proposals)
    if distances is None:
        distances = compute_distances(proposals, observed, distance)
    trace = rejection_indicators(distances, epsilon_abc, c_stop)
    return _result(proposals, trace, np.asarray(distances, dtype=float), None)


def run_abcdp(
    proposals: Sequence[ProposalRecord],
    observed,
    distance,
    epsilon_abc: float,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    distances: np.ndarray | None = None,
    synthetic: bool = False,
    record_noise: bool = False,
) -> AbcResult:
    """c-sample private rejection ABC.

    Args:
        proposals: Public ``(theta_t, Y_t)`` pairs, indexed ``1..T``.
        observed: The sensitive dataset ``Y*``.
        distance: A distance object exposing ``sensitivity(n)`` and ``bind``.
        epsilon_abc: Similarity threshold.
        budget: Calibrated for ``distance.sensitivity(len(observed))``.
        rng: Noise source owned by this run.
        distances: Precomputed ``rho_t``; computed here when omitted.
        synthetic: Set when ``observed`` is test data, which allows the
            distances to be attached to the result.
        record_noise: Keep the raw noise draws on the trace (tests only).
    """
    _check_proposals(proposals)
    observed = as_dataset(observed)
    expected = distance.sensitivity(observed.shape[0])
    if not math.isclose(budget.delta_rho, expected, rel_tol=1e-12):
        raise ValueError(
            f"budget calibrated for sensitivity {budget.delta_rho}, distance has {expected} at N={observed.shape[0]}"
        )
    if distances is None:
        distances = compute_distances(proposals, observed, distance)
    trace = sparse_vector_indicators(
        distances, epsilon_abc, budget.c, budget.b, budget.resample, rng, record_noise=record_noise
    )
    exposed = np.asarray(distances, dtype=float) if (synthetic or not budget.private) else None
    return _result(proposals, trace, exposed, budget)
