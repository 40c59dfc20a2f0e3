"""Monte Carlo replication of the estimators against their closed-form limits."""

from __future__ import annotations

import json
import math
import os
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CollinearError, ResampleLimitError, WeakDenominatorError
from .estimators import ESTIMATORS, estimate_all
from .scenarios import Kind, ScenarioSpec, closed_form, generate

__all__ = [
    "EstimatorSummary",
    "ExperimentPlan",
    "SimulationSummary",
    "convergence_scan",
    "format_table",
    "replication_seed",
    "run",
    "worker_count",
]

THREADS_ENV = "CAUSAL_TRADEOFF_THREADS"
_TARGET = {"ols_without_z": "lambda2", "ols_with_z": "lambda3", "tsls_with_z": "lambda4"}
_HEADINGS = {"ols_without_z": "OLS without Z", "ols_with_z": "OLS with Z", "tsls_with_z": "2SLS with Z"}


@dataclass(frozen=True)
class ExperimentPlan:
    spec: ScenarioSpec
    n_per_rep: int
    replications: int
    seed: int
    estimators: tuple[str, ...] = ESTIMATORS

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.replications < 2:
            raise ValueError("replications must be at least 2")
        if self.n_per_rep < 50:
            raise ValueError("n_per_rep must be at least 50")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n_per_rep": self.n_per_rep,
            "replications": self.replications,
            "seed": self.seed,
            "estimators": list(self.estimators),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> ExperimentPlan:
        spec_doc = doc.get("spec")
        if spec_doc is None:
            raise ValueError("plan document needs a 'spec'")
        spec = ScenarioSpec.from_dict(spec_doc)
        return cls(
            spec=spec,
            n_per_rep=int(doc.get("n_per_rep", spec.n or 500)),
            replications=int(doc.get("replications", 500)),
            seed=int(doc.get("seed", spec.seed if spec.seed is not None else 0)),
            estimators=tuple(doc.get("estimators", ESTIMATORS)),
        )

    @classmethod
    def from_json(cls, text: str) -> ExperimentPlan:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EstimatorSummary:
    """Aggregate of one estimator over all replications.

    ``mean_inconsistency`` is ``|mean(estimate) - ACE|``, the Monte Carlo
    estimate of the probability-limit distance; ``mean_abs_deviation`` is the
    average of ``|estimate - ACE|`` and also carries sampling noise.
    """

    name: str
    mean_estimate: float
    mean_inconsistency: float
    mean_abs_deviation: float
    mc_std_err: float
    closed_form_target: float | None
    z_score: float | None

    def to_dict(self) -> dict:
        return {
            "mean_estimate": self.mean_estimate,
            "mean_inconsistency": self.mean_inconsistency,
            "mean_abs_deviation": self.mean_abs_deviation,
            "mc_std_err": self.mc_std_err,
            "closed_form_target": self.closed_form_target,
            "z_score": self.z_score,
        }


@dataclass(frozen=True)
class SimulationSummary:
    plan: ExperimentPlan
    ace: float
    estimators: Mapping[str, EstimatorSummary]
    resampled: int = 0
    runtime_seconds: float = 0.0
    estimates: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {
            "plan": self.plan.to_dict(),
            "ace": self.ace,
            "resampled": self.resampled,
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
        }
        if include_runtime:
            out["runtime_seconds"] = self.runtime_seconds
        return out


def worker_count(requested: int | None = None) -> int:
    """Worker threads: ``requested``, else the environment cap, else the CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return max(1, min(os.cpu_count() or 1, 8))


def replication_seed(base: int, rep: int, replications: int, attempt: int = 0) -> int:
    """Seed of replication ``rep`` on its ``attempt``-th draw.

    The index is XORed into the base seed shifted left by 32 bits, so
    different base seeds never share replication seeds (a plain
    ``base ^ rep`` maps every base below ``R`` onto the same set).
    """
    return (base << 32) ^ (rep + replications * attempt)


def _replicate(plan: ExperimentPlan, rep: int) -> tuple[list[float], int]:
    spec = plan.spec
    het = spec.kind is Kind.HETEROGENEITY
    attempt = 0
    while True:
        seed = replication_seed(plan.seed, rep, plan.replications, attempt)
        data = generate(spec, plan.n_per_rep, seed)
        try:
            est = estimate_all(data.columns, spec.with_covariates, het, plan.estimators)
        except (CollinearError, WeakDenominatorError):
            attempt += 1
            if attempt > plan.replications:
                raise
            continue
        return [est[name] for name in plan.estimators], attempt


def run(plan: ExperimentPlan, workers: int | None = None) -> SimulationSummary:
    """Simulate ``plan.replications`` datasets and summarize each estimator.

    Replication ``r`` draws from :func:`replication_seed`. A replication
    whose fit fails numerically is redrawn with attempt ``k = 1, 2, ...``
    (index ``r + R * k``); more than ``max(1, R // 100)`` redraws in total raise
    :class:`ResampleLimitError`. Results are collected in replication order,
    so the summary does not depend on the number of workers.
    """
    started = time.perf_counter()
    cf = closed_form(plan.spec)
    n_workers = min(worker_count(workers), plan.replications)
    reps = range(plan.replications)
    if n_workers == 1:
        results = [_replicate(plan, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda r: _replicate(plan, r), reps))
    resampled = sum(a for _, a in results)
    cap = max(1, plan.replications // 100)
    if resampled > cap:
        raise ResampleLimitError(f"{resampled} replications had to be redrawn (cap {cap})")
    mat = np.array([v for v, _ in results])
    summaries = {}
    estimates = {}
    for j, name in enumerate(plan.estimators):
        col = mat[:, j]
        estimates[name] = col
        mean = float(np.mean(col))
        se = float(np.std(col, ddof=1) / math.sqrt(col.size))
        target = getattr(cf, _TARGET[name])
        incons = abs(mean - cf.a1)
        z = None if target is None or se == 0 else (incons - target) / se
        summaries[name] = EstimatorSummary(
            name, mean, incons, float(np.mean(np.abs(col - cf.a1))), se, target, z
        )
    return SimulationSummary(plan, cf.a1, summaries, resampled, time.perf_counter() - started, estimates)


def convergence_scan(
    spec: ScenarioSpec,
    n_grid: Sequence[int],
    replications: int,
    seed: int,
    estimators: Sequence[str] = ESTIMATORS,
    workers: int | None = None,
) -> list[SimulationSummary]:
    """One :func:`run` per sample size in ``n_grid`` (strictly increasing)."""
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    return [run(ExperimentPlan(spec, n, replications, seed, tuple(estimators)), workers) for n in n_grid]


def format_table(summary: SimulationSummary, digits: int = 3) -> str:
    """Aligned text table: closed form, simulated mean, standard error and z per estimator."""
    names = list(summary.plan.estimators)
    width = max(14, *(len(_HEADINGS[n]) for n in names)) + 2
    fmt = lambda v: "n/a" if v is None else f"{v:.{digits}f}"  # noqa: E731
    rows = [
        ("Closed Form Result", [fmt(summary.estimators[n].closed_form_target) for n in names]),
        ("Simulated Result", [fmt(summary.estimators[n].mean_inconsistency) for n in names]),
        ("MC std. error", [f"{summary.estimators[n].mc_std_err:.2e}" for n in names]),
        ("z-score", [fmt(summary.estimators[n].z_score) for n in names]),
    ]
    label_w = max(len(r[0]) for r in rows) + 2
    spec = summary.plan.spec
    lines = [
        f"{spec.kind.value} ({'with' if spec.with_covariates else 'without'} covariates): "
        f"{summary.plan.replications} replications of n = {summary.plan.n_per_rep}, seed {summary.plan.seed}",
        " " * label_w + "".join(_HEADINGS[n].rjust(width) for n in names),
    ]
    for label, cells in rows:
        lines.append(label.ljust(label_w) + "".join(c.rjust(width) for c in cells))
    if summary.resampled:
        lines.append(f"redrawn replications: {summary.resampled}")
    return "\n".join(lines) + "\n"
