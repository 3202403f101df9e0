"""Generative models and the public proposal phase.

Three models are provided:

``uniform_mixture``
    Five-component mixture of unit-width uniforms on ``[i-1, i]`` with a
    Dirichlet(1) prior on the mixing weights.
``polynomial_outbreak``
    Deterministic cubic case curve ``y(t) = a3 + a2 t + a1 t^2 + a0 t^3`` on
    ``t = 0..17`` with standard normal priors on the coefficients.
``birth_death``
    A two-phase linear birth-death process with cluster (genotype) labels.
    Parameters are ``(beta, R1, t1, R2)``: ``beta`` sets the rate of new
    cluster introductions, every infectious individual transmits within its
    cluster at rate ``R * removal_rate`` and is removed at ``removal_rate``,
    with ``R = R1`` before time ``t1`` and ``R2`` after. The output is the
    multiset of cluster sizes once ``n`` cases have been observed.

The birth-death model is a simplified stand-in that keeps the prior and the
two-phase structure; it is not a reproduction of any published TB simulator.
"""
from __future__ import annotations

import ast
import logging
import math
import operator
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .distance import as_dataset
from .engine import ProposalRecord
from .seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

THETA_STAR_MIXTURE = (0.25, 0.04, 0.33, 0.04, 0.34)
COVID_T_GRID = tuple(range(18))
MAX_EVENTS = 1_000_000
MAX_PRIOR_REDRAWS = 10_000


# --- priors -----------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def eval_bound(expr: float | int | str, env: Mapping[str, float]) -> float:
    """Evaluate a numeric literal or an arithmetic expression over earlier parameters."""
    if isinstance(expr, (int, float)):
        return float(expr)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValueError(f"bound refers to unknown parameter {node.id!r}")
            return float(env[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported syntax in bound expression {expr!r}")

    return ev(ast.parse(str(expr), mode="eval"))


@dataclass(frozen=True)
class ParamPrior:
    """One block of the prior.

    ``dist`` is ``"dirichlet"`` (uses ``alpha``; contributes ``len(alpha)``
    coordinates), ``"normal"`` (``mu``, ``sigma``) or ``"uniform"`` (``lo``,
    ``hi``; either bound may be an expression over earlier parameter names).
    """

    name: str
    dist: str
    alpha: tuple[float, ...] | None = None
    mu: float | None = None
    sigma: float | None = None
    lo: float | str | None = None
    hi: float | str | None = None

    @property
    def size(self) -> int:
        return len(self.alpha) if self.dist == "dirichlet" else 1

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "dist": self.dist}
        if self.dist == "dirichlet":
            out["alpha"] = list(self.alpha)
        elif self.dist == "normal":
            out.update(mu=self.mu, sigma=self.sigma)
        else:
            out.update(lo=self.lo, hi=self.hi)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamPrior":
        dist = d.get("dist")
        name = d.get("name")
        if not isinstance(name, str) or not name:
            raise ValueError("prior entry needs a name")
        if dist == "dirichlet":
            alpha = tuple(float(a) for a in d["alpha"])
            if not alpha or any(a <= 0 for a in alpha):
                raise ValueError(f"dirichlet alpha for {name!r} must be positive")
            return cls(name, dist, alpha=alpha)
        if dist == "normal":
            if not float(d["sigma"]) > 0:
                raise ValueError(f"normal sigma for {name!r} must be positive")
            return cls(name, dist, mu=float(d["mu"]), sigma=float(d["sigma"]))
        if dist == "uniform":
            lo, hi = d["lo"], d["hi"]
            if isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and not lo < hi:
                raise ValueError(f"uniform bounds for {name!r} need lo < hi")
            return cls(name, dist, lo=lo, hi=hi)
        raise ValueError(f"unknown prior distribution {dist!r} for {name!r}")


@dataclass(frozen=True)
class PriorSpec:
    params: tuple[ParamPrior, ...]

    @property
    def dim(self) -> int:
        return sum(p.size for p in self.params)

    @property
    def names(self) -> list[str]:
        out = []
        for p in self.params:
            if p.size == 1:
                out.append(p.name)
            else:
                out.extend(f"{p.name}_{i}" for i in range(p.size))
        return out

    def to_dict(self) -> list[dict]:
        return [p.to_dict() for p in self.params]

    @classmethod
    def from_dict(cls, entries: Sequence[Mapping[str, Any]]) -> "PriorSpec":
        return cls(tuple(ParamPrior.from_dict(e) for e in entries))


def sample_prior(spec: PriorSpec, rng: np.random.Generator, counter: Counter | None = None) -> np.ndarray:
    """One joint prior draw.

    A uniform whose derived bounds come out inverted (``lo >= hi``) rejects
    the whole draw, which is redrawn; rejections are tallied in
    ``counter["prior_rejections"]`` when a counter is supplied.
    """
    for _ in range(MAX_PRIOR_REDRAWS):
        values: list[float] = []
        env: dict[str, float] = {}
        ok = True
        for p in spec.params:
            if p.dist == "dirichlet":
                draw = rng.dirichlet(p.alpha)
                values.extend(draw.tolist())
            elif p.dist == "normal":
                x = float(rng.normal(p.mu, p.sigma))
                values.append(x)
                env[p.name] = x
            else:
                lo, hi = eval_bound(p.lo, env), eval_bound(p.hi, env)
                if not lo < hi:
                    ok = False
                    break
                x = float(rng.uniform(lo, hi))
                values.append(x)
                env[p.name] = x
        if ok:
            return np.array(values)
        if counter is not None:
            counter["prior_rejections"] += 1
    raise RuntimeError(f"prior produced inverted bounds {MAX_PRIOR_REDRAWS} times in a row")


def mixture_prior() -> PriorSpec:
    return PriorSpec((ParamPrior("theta", "dirichlet", alpha=(1.0,) * 5),))


def polynomial_prior() -> PriorSpec:
    return PriorSpec(tuple(ParamPrior(f"a{i}", "normal", mu=0.0, sigma=1.0) for i in range(4)))


def birth_death_prior() -> PriorSpec:
    return PriorSpec(
        (
            ParamPrior("beta", "normal", mu=200.0, sigma=30.0),
            ParamPrior("R1", "uniform", lo=1.01, hi=20.0),
            ParamPrior("t1", "uniform", lo=0.01, hi=30.0),
            ParamPrior("R2", "uniform", lo=0.01, hi="(1 - 0.05*R1)/0.95"),
        )
    )


# --- simulators -------------------------------------------------------------

def simulate_uniform_mixture(theta, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws from ``sum_i theta_i Uniform[i-1, i]``, shape ``(n, 1)``."""
    w = np.asarray(theta, dtype=float).ravel()
    if w.size != 5 or np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights must lie on the 5-simplex, got {w}")
    w = np.clip(w, 0.0, None)
    comp = rng.choice(5, size=n, p=w / w.sum())
    return (comp + rng.random(n))[:, None]


def simulate_polynomial_outbreak(a, t_grid: Sequence[float] = COVID_T_GRID) -> np.ndarray:
    """Cubic curve ``a3 + a2 t + a1 t^2 + a0 t^3`` at each grid time, shape ``(len(t_grid), 1)``."""
    a0, a1, a2, a3 = (float(v) for v in np.asarray(a, dtype=float).ravel())
    t = np.asarray(t_grid, dtype=float)
    return (a3 + a2 * t + a1 * t**2 + a0 * t**3)[:, None]


@dataclass
class BirthDeathParams:
    removal_rate: float = 0.1
    introduction_scale: float = 0.01
    max_events: int = MAX_EVENTS

    @classmethod
    def from_mapping(cls, params: Mapping[str, Any] | None) -> "BirthDeathParams":
        params = dict(params or {})
        known = {k: params[k] for k in ("removal_rate", "introduction_scale", "max_events") if k in params}
        return cls(**known)


@dataclass
class ClusterSample:
    """Cluster sizes (descending) plus bookkeeping from one simulation."""

    sizes: np.ndarray
    truncated: bool
    n_events: int

    def as_dataset(self) -> np.ndarray:
        return self.sizes.astype(float)[:, None]


def simulate_birth_death(
    theta,
    n: int,
    rng: np.random.Generator,
    params: BirthDeathParams | Mapping[str, Any] | None = None,
) -> ClusterSample:
    """Event-driven simulation until ``n`` cases have occurred.

    Cases are introductions (each founds a new cluster) and transmissions
    (added to the infector's cluster). Removals free no case. If the event
    cap is hit first, the partial cluster sizes are returned with
    ``truncated=True``.
    """
    if not isinstance(params, BirthDeathParams):
        params = BirthDeathParams.from_mapping(params)
    beta, r1, t1, r2 = (float(v) for v in np.asarray(theta, dtype=float).ravel())
    if n < 1:
        raise ValueError("need at least one observed case")
    if r1 <= 0 or r2 < 0 or params.removal_rate <= 0:
        raise ValueError("reproduction numbers and removal rate must be positive")
    intro = max(beta, 0.0) * params.introduction_scale
    delta = params.removal_rate

    sizes: list[int] = []
    infectious: list[int] = []  # cluster id of each infectious individual
    t = 0.0
    cases = 0
    events = 0
    truncated = False
    block = 4096
    u = rng.random(block)
    k = 0

    while cases < n:
        if events >= params.max_events:
            truncated = True
            break
        if k + 2 > block:
            u = rng.random(block)
            k = 0
        r_now = r1 if t < t1 else r2
        n_inf = len(infectious)
        birth = n_inf * r_now * delta
        death = n_inf * delta
        total = intro + birth + death
        if total <= 0.0:
            truncated = True
            break
        dt = -math.log(1.0 - u[k]) / total
        # rates change at t1; restart the clock there (memoryless)
        if t < t1 <= t + dt and r1 != r2:
            t = t1
            k += 1
            continue
        t += dt
        pick = u[k + 1] * total
        k += 2
        events += 1
        if pick < intro:
            sizes.append(1)
            infectious.append(len(sizes) - 1)
            cases += 1
            continue
        pick -= intro
        if pick < birth:
            who = min(int(pick / birth * n_inf), n_inf - 1)
            cluster = infectious[who]
            sizes[cluster] += 1
            infectious.append(cluster)
            cases += 1
        else:
            who = min(int((pick - birth) / death * n_inf), n_inf - 1)
            infectious[who] = infectious[-1]
            infectious.pop()

    return ClusterSample(np.array(sorted(sizes, reverse=True), dtype=np.int64), truncated, events)


def cluster_summary(data) -> np.ndarray:
    """``[number of clusters, largest cluster, number of singletons, total cases]``."""
    sizes = as_dataset(data)[:, 0]
    return np.array(
        [sizes.size, sizes.max(), np.count_nonzero(sizes == 1), sizes.sum()],
        dtype=float,
    )


# changing one case's cluster label moves the counts by at most these amounts
CLUSTER_SUMMARY_MAX_CHANGE = (1.0, 1.0, 2.0, 0.0)


def cluster_summary_sensitivity(weights: Sequence[float]) -> float:
    """Per-record sensitivity of the weighted L2 distance on :func:`cluster_summary`."""
    w = np.asarray(weights, dtype=float)
    return float(math.sqrt(np.sum(w * np.square(CLUSTER_SUMMARY_MAX_CHANGE))))


# --- simulator specs and proposals ------------------------------------------

@dataclass
class SimulatorSpec:
    name: str
    prior: PriorSpec
    n_pseudo: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SIMULATORS:
            raise ValueError(f"unknown simulator {self.name!r}; choose from {sorted(SIMULATORS)}")
        if int(self.n_pseudo) < 1:
            raise ValueError("n_pseudo must be >= 1")

    def simulate(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        return SIMULATORS[self.name](theta, n, rng, self.params)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "prior": self.prior.to_dict(),
            "n_pseudo": int(self.n_pseudo),
            "params": dict(self.params),
        }


def _run_mixture(theta, n, rng, params):
    return simulate_uniform_mixture(theta, n, rng)


def _run_polynomial(theta, n, rng, params):
    grid = params.get("t_grid", COVID_T_GRID)
    return simulate_polynomial_outbreak(theta, grid)


def _run_birth_death(theta, n, rng, params):
    out = simulate_birth_death(theta, n, rng, params)
    if out.truncated:
        logger.warning("birth-death simulation hit the event cap at theta=%s", theta)
    return out.as_dataset()


SIMULATORS: dict[str, Callable] = {
    "uniform_mixture": _run_mixture,
    "polynomial_outbreak": _run_polynomial,
    "birth_death": _run_birth_death,
}

DEFAULT_PRIORS: dict[str, Callable[[], PriorSpec]] = {
    "uniform_mixture": mixture_prior,
    "polynomial_outbreak": polynomial_prior,
    "birth_death": birth_death_prior,
}


def default_spec(name: str, n_pseudo: int, **params) -> SimulatorSpec:
    return SimulatorSpec(name, DEFAULT_PRIORS[name](), n_pseudo, params)


def build_proposals(spec: SimulatorSpec, T: int, seed: int, counter: Counter | None = None) -> list[ProposalRecord]:
    """Draw ``T`` prior samples and simulate a pseudo-dataset for each.

    Record ``t`` uses its own generator seeded by ``derive_seed(seed,
    "proposal", t)``, so records are reproducible individually and can be
    produced in any order.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    records = []
    for t in range(1, T + 1):
        rng = make_rng(derive_seed(seed, "proposal", t))
        theta = sample_prior(spec.prior, rng, counter)
        data = as_dataset(spec.simulate(theta, spec.n_pseudo, rng))
        records.append(ProposalRecord(t, theta, data))
    return records


def simulate_observed(spec: SimulatorSpec, theta_star, n: int, seed: int) -> np.ndarray:
    """Synthetic observed data from ground-truth parameters."""
    return as_dataset(spec.simulate(np.asarray(theta_star, dtype=float), n, make_rng(derive_seed(seed, "observed"))))
