"""End-to-end experiment runs driven by an :class:`ExperimentConfig`.

Seeds: every stream is derived from ``master_seed`` with
:func:`abcdp.seeding.derive_seed` using these labels:

* ``("proposals",)`` / ``("proposals", r)`` for the public proposal set
  (the second form only when ``resimulate`` is on),
* ``("observed",)`` / ``("observed", r)`` for synthetic observations,
* ``("theta_star",)`` when the ground truth is itself a prior draw,
* ``("bandwidth",)`` for the median-heuristic subsample,
* ``("noise", r)`` for the privacy noise of replication ``r``.

The noise stream of replication ``r`` is shared by every setting of a sweep,
so settings are compared under common random numbers.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .analytics import (
    PosteriorFunctional,
    default_epsilon_grid,
    default_rho_samples,
    expected_error_bound,
    flip_profile,
    flip_profile_grid,
    realized_error,
    tail_bound_scale,
)
from .config import ExperimentConfig, format_epsilon
from .distance import GaussianKernel, MMDDistance, WeightedL2Distance, flatten_summary, load_dataset_csv, median_heuristic_bandwidth
from .engine import AbcResult, PrivacyBudget, ProposalRecord, accountant_report, compute_distances, rejection_indicators, sparse_vector_indicators
from .io import load_proposals, save_proposals, write_csv, write_dict_rows, write_json
from .seeding import derive_seed, make_rng
from .simulators import build_proposals, cluster_summary, cluster_summary_sensitivity, sample_prior, simulate_observed

logger = logging.getLogger(__name__)


@dataclass
class Experiment:
    """Everything a run needs besides the privacy noise."""

    proposals: list[ProposalRecord]
    observed: np.ndarray
    distance: Any
    theta_star: np.ndarray | None
    distances: np.ndarray
    prior_rejections: int = 0

    @property
    def n_observed(self) -> int:
        return int(self.observed.shape[0])

    @property
    def thetas(self) -> np.ndarray:
        return np.vstack([rec.theta for rec in self.proposals])


def _theta_star(config: ExperimentConfig) -> np.ndarray | None:
    ts = config.observed.theta_star
    if ts is None:
        return None
    if ts == "prior":
        return sample_prior(config.simulator.prior, make_rng(derive_seed(config.master_seed, "theta_star")))
    return np.asarray(ts, dtype=float)


def build_distance(config: ExperimentConfig, proposals, observed) -> Any:
    dc = config.distance
    if dc.kind == "mmd":
        bw = dc.bandwidth
        if bw == "median":
            rng = make_rng(derive_seed(config.master_seed, "bandwidth"))
            bw = median_heuristic_bandwidth((rec.pseudo_data for rec in proposals), rng=rng)
        return MMDDistance(GaussianKernel(float(bw)))
    summary = cluster_summary if dc.summary == "cluster" else flatten_summary
    weights = dc.weights
    if weights is None:
        weights = np.ones(np.asarray(summary(observed)).size)
    sens = dc.sensitivity
    if sens == "cluster":
        sens = cluster_summary_sensitivity(weights)
    return WeightedL2Distance(summary, weights, dc.clip, sens, summary_name=dc.summary)


def prepare(config: ExperimentConfig, replication: int | None = None) -> Experiment:
    """Build proposals, observed data, the distance and all ``rho_t``.

    With ``replication`` set, proposals and synthetic observations are drawn
    from replication-specific streams (used when ``resimulate`` is on).
    """
    seed = config.master_seed
    labels = () if replication is None else (replication,)
    counter: Counter = Counter()
    if config.proposals is not None:
        proposals = load_proposals(config.proposals)
    else:
        proposals = build_proposals(
            config.simulator, config.T, derive_seed(seed, "proposals", *labels), counter
        )
    theta_star = _theta_star(config)
    if config.observed.csv is not None:
        observed = load_dataset_csv(config.observed.csv)
    else:
        obs_seed = derive_seed(seed, "observed", *labels)
        observed = simulate_observed(config.simulator, theta_star, config.observed.n, obs_seed)
    distance = build_distance(config, proposals, observed)
    distances = compute_distances(proposals, observed, distance)
    return Experiment(proposals, observed, distance, theta_star, distances, counter["prior_rejections"])


def _budget(config: ExperimentConfig, exp: Experiment, epsilon_total=None, resample=None, c=None) -> PrivacyBudget:
    b = config.budget
    return PrivacyBudget(
        epsilon_total=b.epsilon_total if epsilon_total is None else epsilon_total,
        c=b.c if c is None else c,
        resample=b.resample if resample is None else resample,
        delta_rho=exp.distance.sensitivity(exp.n_observed),
    )


def _posterior_mean(thetas: np.ndarray, accepted_indices: np.ndarray) -> np.ndarray | None:
    if accepted_indices.size == 0:
        return None
    return thetas[accepted_indices - 1].mean(axis=0)


def metrics(posterior_mean: np.ndarray | None, theta_star: np.ndarray | None) -> dict | None:
    """Squared error and mean absolute error of a posterior mean."""
    if posterior_mean is None or theta_star is None:
        return None
    diff = posterior_mean - theta_star
    return {"mse": float(diff @ diff), "mean_abs_error": float(np.mean(np.abs(diff)))}


def _stderr(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def run_dp(config: ExperimentConfig) -> dict:
    """Private runs, one per replication, on a shared proposal set.

    The returned document carries indicators, accepted parameters and the
    budget ledger only; distances and noise never appear in it.
    """
    exp = prepare(config)
    budget = _budget(config, exp)
    ledger = accountant_report(budget)
    thetas = exp.thetas
    runs = []
    for r in range(config.replications):
        rng = make_rng(derive_seed(config.master_seed, "noise", r))
        trace = sparse_vector_indicators(
            exp.distances, config.epsilon_abc, budget.c, budget.b, budget.resample, rng
        )
        mean = _posterior_mean(thetas, trace.accepted_indices)
        runs.append(
            {
                "replication": r,
                "indicators": trace.indicators.tolist(),
                "accepted_indices": trace.accepted_indices.tolist(),
                "accepted_theta": thetas[trace.accepted_indices - 1].tolist(),
                "posterior_mean": None if mean is None else mean.tolist(),
                "terminated_early": trace.terminated_early,
                "acceptance_rate": trace.n_accepted / trace.n_steps,
                "metrics": metrics(mean, exp.theta_star),
            }
        )
    scored = [run["metrics"] for run in runs if run["metrics"] is not None]
    summary = None
    if scored:
        summary = {
            "mse": float(np.mean([m["mse"] for m in scored])),
            "mean_abs_error": float(np.mean([m["mean_abs_error"] for m in scored])),
            "acceptance_rate": float(np.mean([run["acceptance_rate"] for run in runs])),
            "replications_scored": len(scored),
        }
    return {
        "mode": "dp_run",
        "epsilon_abc": config.epsilon_abc,
        "ledger": ledger,
        "parameter_names": config.simulator.prior.names,
        "theta_star": None if exp.theta_star is None else exp.theta_star.tolist(),
        "runs": runs,
        "metrics": summary,
    }


def paired_benchmark(config: ExperimentConfig) -> dict:
    """Private vs non-private runs on identical proposals, for every sweep setting.

    The non-private run stops after ``c`` acceptances like the private one.
    Replications where either run accepts nothing are excluded from the error
    statistics and counted in ``n_excluded``.
    """
    sweep = config.sweep
    eps_abc_grid = sweep.epsilon_abc if sweep else (config.epsilon_abc,)
    eps_total_grid = sweep.epsilon_total if sweep else (config.budget.epsilon_total,)
    resample_grid = sweep.resample if sweep else (config.budget.resample,)
    c_grid = sweep.c if sweep else (config.budget.c,)
    settings = [(c, ea, et, rs) for c in c_grid for ea in eps_abc_grid for rs in resample_grid for et in eps_total_grid]
    acc: dict[tuple, dict[str, list]] = {s: {"mse": [], "mae": [], "abc_mse": [], "error": [],
                                             "bound": [], "tail_scale": [], "rate": [], "excluded": 0}
                                         for s in settings}
    ledgers: dict[tuple, dict] = {}

    shared = None if config.resimulate else prepare(config)
    for r in range(config.replications):
        exp = prepare(config, replication=r) if config.resimulate else shared
        thetas = exp.thetas
        functional = PosteriorFunctional(thetas)
        for c, ea in ((c, ea) for c in c_grid for ea in eps_abc_grid):
            public = rejection_indicators(exp.distances, ea, c)
            abc_mean = _posterior_mean(thetas, public.accepted_indices)
            for rs in resample_grid:
                for et in eps_total_grid:
                    budget = _budget(config, exp, et, rs, c)
                    ledgers[(c, ea, et, rs)] = accountant_report(budget)
                    rng = make_rng(derive_seed(config.master_seed, "noise", r))
                    private = sparse_vector_indicators(exp.distances, ea, c, budget.b, rs, rng)
                    bucket = acc[(c, ea, et, rs)]
                    err = realized_error(functional, private, public)
                    if err is None:
                        bucket["excluded"] += 1
                        continue
                    mean = _posterior_mean(thetas, private.accepted_indices)
                    m = metrics(mean, exp.theta_star)
                    bucket["mse"].append(m["mse"])
                    bucket["mae"].append(m["mean_abs_error"])
                    bucket["abc_mse"].append(metrics(abc_mean, exp.theta_star)["mse"])
                    bucket["error"].append(err)
                    profile = flip_profile(exp.distances, ea, budget.b)
                    bucket["bound"].append(expected_error_bound(profile, functional, public.n_accepted))
                    bucket["tail_scale"].append(tail_bound_scale(profile, functional, public.n_accepted))
                    bucket["rate"].append(private.n_accepted / private.n_steps)

    rows = []
    for (c, ea, et, rs) in settings:
        b = acc[(c, ea, et, rs)]
        n = len(b["mse"])
        rows.append(
            {
                "epsilon_abc": ea,
                "epsilon_total": et,
                "resample": rs,
                "c": c,
                "replications": n,
                "n_excluded": b["excluded"],
                "mse_mean": float(np.mean(b["mse"])) if n else math.nan,
                "mse_stderr": _stderr(b["mse"]),
                "mae_mean": float(np.mean(b["mae"])) if n else math.nan,
                "mae_stderr": _stderr(b["mae"]),
                "abc_mse_mean": float(np.mean(b["abc_mse"])) if n else math.nan,
                "realized_error_mean": float(np.mean(b["error"])) if n else math.nan,
                "realized_error_stderr": _stderr(b["error"]),
                "expected_error_bound": float(np.mean(b["bound"])) if n else math.nan,
                "tail_scale": float(np.mean(b["tail_scale"])) if n else math.nan,
                "acceptance_rate": float(np.mean(b["rate"])) if n else math.nan,
                "realized_errors": b["error"],
            }
        )
    return {
        "mode": "paired_benchmark",
        "replications": config.replications,
        "resimulate": config.resimulate,
        "ledgers": [{"epsilon_abc": key[1], **ledgers[key]} for key in settings if key in ledgers],
        "settings": rows,
    }


def run_flip_grid(config: ExperimentConfig) -> dict:
    fg = config.flip_grid
    rho = default_rho_samples(make_rng(derive_seed(config.master_seed, "rho")), fg.n_rho)
    eps_grid = fg.epsilon_total if fg.epsilon_total is not None else tuple(default_epsilon_grid(fg.n_points))
    rows = flip_profile_grid(rho, fg.epsilon_abc, fg.N, fg.c, eps_grid, fg.resample)
    return {"mode": "flip_grid", "epsilon_abc": fg.epsilon_abc, "resample": fg.resample, "rows": rows}


def bounds_report(config: ExperimentConfig) -> dict:
    """Analytic error bounds for the configured run on synthetic data."""
    exp = prepare(config)
    budget = _budget(config, exp)
    functional = PosteriorFunctional(exp.thetas)
    public = rejection_indicators(exp.distances, config.epsilon_abc, budget.c)
    profile = flip_profile(exp.distances, config.epsilon_abc, budget.b)
    out: dict[str, Any] = {
        "mode": "bounds_report",
        "ledger": accountant_report(budget),
        "epsilon_abc": config.epsilon_abc,
        "T": len(exp.proposals),
        "k_max": functional.k_max,
        "c_prime": public.n_accepted,
        "mean_flip_probability": float(np.mean(profile.flip_probs)),
    }
    if public.n_accepted == 0:
        out["expected_error_bound"] = None
        out["tail_bounds"] = []
        return out
    scale = tail_bound_scale(profile, functional, public.n_accepted)
    a_values = config.bounds_a
    if a_values is None:
        # a at which the lower bound equals 1/4, 1/2 and 3/4
        a_values = tuple(scale / (1.0 - q) for q in (0.25, 0.5, 0.75)) if scale > 0 else (1.0,)
    out["expected_error_bound"] = expected_error_bound(profile, functional, public.n_accepted)
    out["tail_scale"] = scale
    out["tail_bounds"] = [{"a": a, "probability_lower_bound": max(0.0, 1.0 - scale / a)} for a in a_values]
    return out


def run(config: ExperimentConfig) -> dict:
    dispatch = {
        "dp_run": run_dp,
        "paired_benchmark": paired_benchmark,
        "flip_grid": run_flip_grid,
        "bounds_report": bounds_report,
    }
    return dispatch[config.mode](config)


class UsageError(ValueError):
    """Raised when an artifact is asked of results that cannot provide it."""


PLOT_KINDS = {"fig1": "flip_grid", "fig2": "paired_benchmark", "posterior_hist": "dp_run"}
FIG1_COLUMNS = ("N", "c", "epsilon_total", "mean_flip_prob")
# c trails the fixed five columns so sweeps over c stay distinguishable
FIG2_COLUMNS = ("epsilon_abc", "epsilon_total", "resample", "mse_mean", "mse_stderr", "c")
POSTERIOR_HIST_COLUMNS = ("replication", "t", "parameter", "value")
BENCHMARK_COLUMNS = (
    "epsilon_abc", "epsilon_total", "resample", "c", "replications", "n_excluded",
    "mse_mean", "mse_stderr", "mae_mean", "mae_stderr", "abc_mse_mean",
    "realized_error_mean", "realized_error_stderr", "expected_error_bound",
    "tail_scale", "acceptance_rate",
)


def emit_plot_data(results: dict, kind: str, out_dir) -> Path:
    """Write the plotting table ``<kind>.csv`` derived from a results document."""
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    need = PLOT_KINDS[kind]
    if results.get("mode") != need:
        raise UsageError(f"{kind} needs {need} results, got {results.get('mode')!r}")
    path = Path(out_dir) / f"{kind}.csv"
    if kind == "fig1":
        return write_dict_rows(path, FIG1_COLUMNS, results["rows"])
    if kind == "fig2":
        return write_dict_rows(path, FIG2_COLUMNS, results["settings"])
    names = results["parameter_names"]
    rows = [
        (run["replication"], t, name, value)
        for run in results["runs"]
        for t, theta in zip(run["accepted_indices"], run["accepted_theta"])
        for name, value in zip(names, theta)
    ]
    return write_csv(path, POSTERIOR_HIST_COLUMNS, rows)


def write_artifacts(config: ExperimentConfig, results: dict, out_dir) -> list[Path]:
    """Write the config echo, ``results.json`` and the mode's CSV tables."""
    out = Path(out_dir)
    written = [write_json(out / "config.echo.json", config.to_dict()), write_json(out / "results.json", results)]
    mode = results["mode"]
    if mode == "dp_run":
        names = results["parameter_names"]
        written.append(write_csv(
            out / "accepted_theta.csv",
            ("replication", "t", *names),
            ((run["replication"], t, *theta)
             for run in results["runs"]
             for t, theta in zip(run["accepted_indices"], run["accepted_theta"])),
        ))
        written.append(write_csv(
            out / "metrics.csv",
            ("replication", "n_accepted", "terminated_early", "acceptance_rate", "mse", "mean_abs_error"),
            ((run["replication"], len(run["accepted_indices"]), run["terminated_early"], run["acceptance_rate"],
              None if run["metrics"] is None else run["metrics"]["mse"],
              None if run["metrics"] is None else run["metrics"]["mean_abs_error"])
             for run in results["runs"]),
        ))
    elif mode == "paired_benchmark":
        written.append(write_dict_rows(out / "metrics.csv", BENCHMARK_COLUMNS, results["settings"]))
    elif mode == "flip_grid":
        written.append(write_dict_rows(out / "flip_grid.csv", FIG1_COLUMNS, results["rows"]))
    elif mode == "bounds_report":
        written.append(write_csv(
            out / "bounds.csv",
            ("a", "probability_lower_bound"),
            ((row["a"], row["probability_lower_bound"]) for row in results["tail_bounds"]),
        ))
    return written


def export_proposals(config: ExperimentConfig, directory) -> Path:
    """Persist the proposal set a run with this config would use."""
    if config.proposals is not None:
        records = load_proposals(config.proposals)
    else:
        records = build_proposals(config.simulator, config.T, derive_seed(config.master_seed, "proposals"))
    return save_proposals(records, directory)
