"""Experiment configuration: a single versioned JSON document.

Example::

    {
      "schema_version": 1,
      "mode": "paired_benchmark",
      "master_seed": 7,
      "T": 5000,
      "replications": 60,
      "epsilon_abc": 0.1,
      "budget": {"epsilon_total": 10, "c": 100, "resample": true},
      "simulator": {"name": "uniform_mixture", "n_pseudo": 200},
      "observed": {"theta_star": [0.25, 0.04, 0.33, 0.04, 0.34], "n": 5000},
      "distance": {"kind": "mmd", "bandwidth": "median"}
    }

``epsilon_total`` accepts a positive number or the string ``"inf"``.
Validation failures raise :class:`ConfigError` carrying the dotted path of
the offending field.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .simulators import DEFAULT_PRIORS, SIMULATORS, PriorSpec, SimulatorSpec

SCHEMA_VERSION = 1
MODES = ("dp_run", "paired_benchmark", "flip_grid", "bounds_report")
SUMMARIES = ("identity", "cluster")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def parse_epsilon(value: Any, path: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a positive number or 'inf', got {value!r}")
    if not value > 0:
        raise ConfigError(path, f"privacy budget must be > 0, got {value}")
    return float(value)


def format_epsilon(value: float) -> float | str:
    return "inf" if math.isinf(value) else value


def _get(raw: Mapping, key: str, path: str, default: Any = ...) -> Any:
    if key in raw:
        return raw[key]
    if default is ...:
        raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
    return default


def _positive_int(value: Any, path: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(path, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _positive_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(path, f"expected a positive number, got {value!r}")
    return float(value)


def _float_tuple(value: Any, path: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a nonempty list of numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a nonempty list of numbers") from None


@dataclass(frozen=True)
class BudgetConfig:
    epsilon_total: float
    c: int
    resample: bool

    def to_dict(self) -> dict:
        return {"epsilon_total": format_epsilon(self.epsilon_total), "c": self.c, "resample": self.resample}


@dataclass(frozen=True)
class ObservedConfig:
    """Either synthetic data from ``theta_star`` (a list, or ``"prior"`` for a
    prior draw) with ``n`` points, or a headerless CSV at ``csv``."""

    n: int | None = None
    theta_star: tuple[float, ...] | str | None = None
    csv: str | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.n is not None:
            out["n"] = self.n
        if self.theta_star is not None:
            out["theta_star"] = self.theta_star if isinstance(self.theta_star, str) else list(self.theta_star)
        if self.csv is not None:
            out["csv"] = self.csv
        return out


@dataclass(frozen=True)
class DistanceConfig:
    kind: str
    bandwidth: float | str = "median"
    summary: str = "identity"
    weights: tuple[float, ...] | None = None
    clip: float | None = None
    sensitivity: float | str | None = None

    def to_dict(self) -> dict:
        if self.kind == "mmd":
            return {"kind": "mmd", "bandwidth": self.bandwidth}
        return {
            "kind": "weighted_l2",
            "summary": self.summary,
            "weights": None if self.weights is None else list(self.weights),
            "clip": self.clip,
            "sensitivity": self.sensitivity,
        }


@dataclass(frozen=True)
class SweepConfig:
    epsilon_abc: tuple[float, ...]
    epsilon_total: tuple[float, ...]
    resample: tuple[bool, ...]
    c: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "epsilon_abc": list(self.epsilon_abc),
            "epsilon_total": [format_epsilon(e) for e in self.epsilon_total],
            "resample": list(self.resample),
            "c": list(self.c),
        }


@dataclass(frozen=True)
class FlipGridConfig:
    N: tuple[int, ...] = (10, 100, 1000)
    c: tuple[int, ...] = (10, 100, 1000)
    epsilon_total: tuple[float, ...] | None = None
    n_points: int = 25
    n_rho: int = 100
    epsilon_abc: float = 0.2
    resample: bool = True

    def to_dict(self) -> dict:
        return {
            "N": list(self.N),
            "c": list(self.c),
            "epsilon_total": None if self.epsilon_total is None
            else [format_epsilon(e) for e in self.epsilon_total],
            "n_points": self.n_points,
            "n_rho": self.n_rho,
            "epsilon_abc": self.epsilon_abc,
            "resample": self.resample,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    master_seed: int
    simulator: SimulatorSpec | None
    distance: DistanceConfig | None
    observed: ObservedConfig | None
    budget: BudgetConfig | None
    epsilon_abc: float | None
    T: int = 1000
    replications: int = 1
    proposals: str | None = None
    resimulate: bool = False
    sweep: SweepConfig | None = None
    flip_grid: FlipGridConfig = field(default_factory=FlipGridConfig)
    bounds_a: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "master_seed": self.master_seed,
            "T": self.T,
            "replications": self.replications,
            "epsilon_abc": self.epsilon_abc,
            "resimulate": self.resimulate,
            "flip_grid": self.flip_grid.to_dict(),
        }
        if self.budget is not None:
            out["budget"] = self.budget.to_dict()
        if self.simulator is not None:
            out["simulator"] = self.simulator.to_dict()
        if self.observed is not None:
            out["observed"] = self.observed.to_dict()
        if self.distance is not None:
            out["distance"] = self.distance.to_dict()
        if self.proposals is not None:
            out["proposals"] = self.proposals
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        if self.bounds_a is not None:
            out["bounds_a"] = list(self.bounds_a)
        return out


def _parse_simulator(raw: Any, path: str = "simulator") -> SimulatorSpec:
    if not isinstance(raw, Mapping):
        raise ConfigError(path, "expected an object")
    name = _get(raw, "name", path)
    if name not in SIMULATORS:
        raise ConfigError(f"{path}.name", f"unknown simulator {name!r}")
    n_pseudo = _positive_int(_get(raw, "n_pseudo", path), f"{path}.n_pseudo")
    prior_raw = raw.get("prior")
    try:
        prior = DEFAULT_PRIORS[name]() if prior_raw is None else PriorSpec.from_dict(prior_raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.prior", str(exc)) from None
    params = raw.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError(f"{path}.params", "expected an object")
    params = dict(params)
    if "t_grid" in params:
        params["t_grid"] = [float(t) for t in params["t_grid"]]
    return SimulatorSpec(name, prior, n_pseudo, params)


def _parse_distance(raw: Any, path: str = "distance") -> DistanceConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError(path, "expected an object")
    kind = _get(raw, "kind", path)
    if kind == "mmd":
        bw = raw.get("bandwidth", "median")
        if bw != "median":
            bw = _positive_float(bw, f"{path}.bandwidth")
        return DistanceConfig("mmd", bandwidth=bw)
    if kind == "weighted_l2":
        summary = raw.get("summary", "identity")
        if summary not in SUMMARIES:
            raise ConfigError(f"{path}.summary", f"expected one of {SUMMARIES}")
        weights = raw.get("weights")
        if weights is not None:
            weights = _float_tuple(weights, f"{path}.weights")
            if any(w < 0 for w in weights):
                raise ConfigError(f"{path}.weights", "weights must be nonnegative")
        clip = _positive_float(_get(raw, "clip", path), f"{path}.clip")
        sens = raw.get("sensitivity")
        if sens is not None and sens != "cluster":
            sens = _positive_float(sens, f"{path}.sensitivity")
        if sens == "cluster" and summary != "cluster":
            raise ConfigError(f"{path}.sensitivity", "'cluster' sensitivity needs the cluster summary")
        return DistanceConfig("weighted_l2", summary=summary, weights=weights, clip=clip, sensitivity=sens)
    raise ConfigError(f"{path}.kind", f"unknown distance kind {kind!r}")


def _parse_observed(raw: Any, simulator: SimulatorSpec | None, base: Path, path: str = "observed") -> ObservedConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError(path, "expected an object")
    csv = raw.get("csv")
    theta = raw.get("theta_star")
    n = raw.get("n")
    if csv is not None:
        if not isinstance(csv, str):
            raise ConfigError(f"{path}.csv", "expected a file path")
        resolved = (base / csv) if not Path(csv).is_absolute() else Path(csv)
        if not resolved.exists():
            raise ConfigError(f"{path}.csv", f"file not found: {resolved}")
        csv = str(resolved)
    if theta is not None and theta != "prior":
        theta = _float_tuple(theta, f"{path}.theta_star")
        if simulator is not None:
            if len(theta) != simulator.prior.dim:
                raise ConfigError(f"{path}.theta_star", f"expected {simulator.prior.dim} values")
            if simulator.name == "uniform_mixture":
                if any(v < -1e-9 for v in theta) or abs(sum(theta) - 1.0) > 1e-9:
                    raise ConfigError(f"{path}.theta_star", "mixture weights must lie on the simplex")
    if csv is None:
        if theta is None:
            raise ConfigError(path, "give either 'csv' or 'theta_star'")
        if n is None:
            raise ConfigError(f"{path}.n", "required for synthetic observations")
    if n is not None:
        n = _positive_int(n, f"{path}.n")
    return ObservedConfig(n=n, theta_star=theta, csv=csv)


def config_from_dict(raw: Mapping[str, Any], base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a raw JSON document and build an :class:`ExperimentConfig`."""
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    base = Path(base_dir)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported schema version {version!r}")
    mode = _get(raw, "mode", "")
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")
    seed = _get(raw, "master_seed", "", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("master_seed", "expected a nonnegative integer")

    flip = raw.get("flip_grid") or {}
    try:
        flip_cfg = FlipGridConfig(
            N=tuple(_positive_int(v, "flip_grid.N") for v in flip.get("N", (10, 100, 1000))),
            c=tuple(_positive_int(v, "flip_grid.c") for v in flip.get("c", (10, 100, 1000))),
            epsilon_total=None if flip.get("epsilon_total") is None
            else tuple(parse_epsilon(v, "flip_grid.epsilon_total") for v in flip["epsilon_total"]),
            n_points=_positive_int(flip.get("n_points", 25), "flip_grid.n_points", 2),
            n_rho=_positive_int(flip.get("n_rho", 100), "flip_grid.n_rho"),
            epsilon_abc=float(flip.get("epsilon_abc", 0.2)),
            resample=bool(flip.get("resample", True)),
        )
    except AttributeError:
        raise ConfigError("flip_grid", "expected an object") from None
    if mode == "flip_grid":
        return ExperimentConfig(
            mode=mode, master_seed=seed, simulator=None, distance=None, observed=None,
            budget=None, epsilon_abc=None, flip_grid=flip_cfg,
        )

    simulator = _parse_simulator(_get(raw, "simulator", ""))
    distance = _parse_distance(_get(raw, "distance", ""))
    observed = _parse_observed(_get(raw, "observed", ""), simulator, base)
    if mode in ("paired_benchmark", "bounds_report") and observed.theta_star is None:
        raise ConfigError("observed.theta_star", f"mode {mode} needs known ground truth")

    braw = _get(raw, "budget", "")
    if not isinstance(braw, Mapping):
        raise ConfigError("budget", "expected an object")
    budget = BudgetConfig(
        epsilon_total=parse_epsilon(_get(braw, "epsilon_total", "budget"), "budget.epsilon_total"),
        c=_positive_int(_get(braw, "c", "budget"), "budget.c"),
        resample=bool(braw.get("resample", True)),
    )
    eps_abc = _positive_float(_get(raw, "epsilon_abc", ""), "epsilon_abc")

    proposals = raw.get("proposals")
    if proposals is not None:
        ppath = Path(proposals) if Path(proposals).is_absolute() else base / proposals
        if not ppath.exists():
            raise ConfigError("proposals", f"file not found: {ppath}")
        proposals = str(ppath)

    sweep = None
    if raw.get("sweep") is not None:
        s = raw["sweep"]
        if not isinstance(s, Mapping):
            raise ConfigError("sweep", "expected an object")
        sweep = SweepConfig(
            epsilon_abc=tuple(_positive_float(v, "sweep.epsilon_abc") for v in s.get("epsilon_abc", [eps_abc])),
            epsilon_total=tuple(parse_epsilon(v, "sweep.epsilon_total")
                                for v in s.get("epsilon_total", [format_epsilon(budget.epsilon_total)])),
            resample=tuple(bool(v) for v in s.get("resample", [budget.resample])),
            c=tuple(_positive_int(v, "sweep.c") for v in s.get("c", [budget.c])),
        )

    bounds_a = raw.get("bounds_a")
    if bounds_a is not None:
        bounds_a = tuple(_positive_float(v, "bounds_a") for v in bounds_a)

    return ExperimentConfig(
        mode=mode,
        master_seed=seed,
        simulator=simulator,
        distance=distance,
        observed=observed,
        budget=budget,
        epsilon_abc=eps_abc,
        T=_positive_int(raw.get("T", 1000), "T"),
        replications=_positive_int(raw.get("replications", 1), "replications"),
        proposals=proposals,
        resimulate=bool(raw.get("resimulate", False)),
        sweep=sweep,
        flip_grid=flip_cfg,
        bounds_a=bounds_a,
    )


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides; values parse as JSON, else as strings."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


def load_config(path: str | Path, overrides: list[str] | None = None, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    raw = apply_overrides(raw, overrides or [])
    if seed is not None:
        raw["master_seed"] = seed
    return config_from_dict(raw, base_dir=path.parent)
