"""Replications, summary statistics and paired what-if comparisons.

Replication ``i`` of a plan runs with seed ``derive_seed(base_seed, i)``.
In a paired comparison both configurations share that seed (common random
numbers); unpaired, configuration B uses ``derive_seed(base_seed, i, "B")``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .config import ScenarioConfig
from .design_dept import METRIC_NAMES, RunTrace, flatten_outputs, simulate
from .rng import derive_seed
from .stats import t_quantile

__all__ = [
    "COMPARE_METRICS",
    "InsufficientSamples",
    "PairedComparison",
    "ReplicationError",
    "ReplicationPlan",
    "ReplicationRecord",
    "SummaryStats",
    "compare_paired",
    "replication_seed",
    "run_replication",
    "run_replications",
    "summarize",
]

COMPARE_METRICS = (*METRIC_NAMES, "mean_final_communication")


class InsufficientSamples(ValueError):
    pass


class ReplicationError(RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(f"replication {index} (seed {seed}): {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class ReplicationPlan:
    n: int
    base_seed: int
    paired: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one replication, got {self.n}")


def replication_seed(base_seed: int, index: int, arm: str = "") -> int:
    return derive_seed(base_seed, index, arm) if arm else derive_seed(base_seed, index)


@dataclass
class ReplicationRecord:
    index: int
    seed: int
    metrics: dict[str, float]
    # metrics plus final per-agent attribute levels
    outputs: dict[str, float]
    trace: Optional[RunTrace] = field(default=None, repr=False)


def run_replication(
    config: ScenarioConfig,
    index: int,
    seed: int,
    *,
    keep_trace: bool = False,
    record_events: bool = False,
) -> ReplicationRecord:
    try:
        trace, metrics = simulate(config, seed, record_events=record_events)
    except Exception as exc:
        raise ReplicationError(index, seed, exc) from exc
    return ReplicationRecord(
        index, seed, metrics, flatten_outputs(trace, metrics), trace if keep_trace else None
    )


def _run_one(args: tuple) -> ReplicationRecord:
    config, index, seed, keep_trace, record_events = args
    return run_replication(config, index, seed, keep_trace=keep_trace, record_events=record_events)


def run_replications(
    config: ScenarioConfig,
    plan: ReplicationPlan,
    *,
    arm: str = "",
    keep_trace: bool = False,
    record_events: bool = False,
    workers: int = 1,
) -> list[ReplicationRecord]:
    """Run ``plan.n`` replications; records come back ordered by index."""
    jobs = [
        (config, i, replication_seed(plan.base_seed, i, arm), keep_trace, record_events)
        for i in range(plan.n)
    ]
    if workers > 1 and plan.n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]
    return sorted(records, key=lambda r: r.index)


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    alpha: float
    # a single sample has no interval; ci collapses onto the mean
    degenerate: bool = False

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def excludes_zero(self) -> bool:
        return not self.degenerate and (self.ci_low > 0 or self.ci_high < 0)


def summarize(samples: Sequence[float], alpha: float = 0.05) -> SummaryStats:
    """Mean, sample standard deviation and the Student-t interval for the mean."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    xs = [float(x) for x in samples]
    n = len(xs)
    if n == 0:
        raise InsufficientSamples("cannot summarise zero samples")
    mean = math.fsum(xs) / n
    if n == 1:
        return SummaryStats(1, mean, 0.0, mean, mean, alpha, degenerate=True)
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / (n - 1))
    half = t_quantile(1.0 - alpha / 2.0, n - 1) * sd / math.sqrt(n)
    # ci_low <= mean <= ci_high must survive rounding
    return SummaryStats(n, mean, sd, min(mean - half, mean), max(mean + half, mean), alpha)


@dataclass
class PairedComparison:
    plan: ReplicationPlan
    # metric -> summary of per-replication B - A
    stats: dict[str, SummaryStats]
    differences: dict[str, list[float]]
    records_a: list[ReplicationRecord]
    records_b: list[ReplicationRecord]


def compare_paired(
    config_a: ScenarioConfig,
    config_b: ScenarioConfig,
    plan: ReplicationPlan,
    *,
    alpha: float = 0.05,
    metrics: Sequence[str] = COMPARE_METRICS,
    workers: int = 1,
) -> PairedComparison:
    """Summarise per-replication differences ``B - A`` for each metric."""
    rec_a = run_replications(config_a, plan, keep_trace=True, workers=workers)
    rec_b = run_replications(config_b, plan, arm="" if plan.paired else "B", keep_trace=True, workers=workers)
    diffs: dict[str, list[float]] = {}
    for name in metrics:
        if all(name in a.outputs and name in b.outputs for a, b in zip(rec_a, rec_b)):
            diffs[name] = [b.outputs[name] - a.outputs[name] for a, b in zip(rec_a, rec_b)]
    stats = {name: summarize(d, alpha) for name, d in diffs.items()}
    return PairedComparison(plan, stats, diffs, rec_a, rec_b)
