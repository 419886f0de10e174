"""Inverse calibration: find inputs whose simulated outputs match targets.

The search has two phases.  Phase one evaluates ``ceil(0.7 * budget)``
points of a nested Latin hypercube: the design is built by doubling, so
every design of ``2^L`` points is Latin in ``2^L`` strata per coordinate
and contains the ``2^(L-1)``-point design, and a smaller budget always
evaluates a prefix of a larger one.  Phase two spends the rest on a
coordinate search around the best point, halving the step after a sweep
without improvement.

Each evaluation averages outputs over ``replications_per_eval`` runs whose
seeds are shared by every candidate, so candidates are compared on common
random numbers and the objective is a deterministic function of the
parameters.  Several near-best candidates are reported, not just one.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

from .config import ScenarioConfig, get_path
from .design_dept import flatten_outputs, simulate
from .rng import RngStreams, derive_seed

__all__ = [
    "BadBudget",
    "BadWeights",
    "CalibrationResult",
    "CandidateResult",
    "MissingMetric",
    "Param",
    "ParamSpace",
    "Target",
    "calibrate_search",
    "discrepancy",
    "make_evaluator",
    "nested_lhs",
    "parse_targets",
]

SCALE_FLOOR = 1e-9


class MissingMetric(KeyError):
    pass


class BadWeights(ValueError):
    pass


class BadBudget(ValueError):
    pass


@dataclass(frozen=True)
class Target:
    value: float
    weight: float = 1.0


def parse_targets(data: Mapping[str, Any]) -> dict[str, Target]:
    """Targets as ``{"metric": value}`` or ``{"metric": {"value": v, "weight": w}}``."""
    out = {}
    for name, spec in data.items():
        if isinstance(spec, Mapping):
            out[name] = Target(float(spec["value"]), float(spec.get("weight", 1.0)))
        else:
            out[name] = Target(float(spec))
    return out


def discrepancy(metrics: Mapping[str, float], targets: Mapping[str, Target]) -> float:
    """Weighted root-mean-square relative error of ``metrics`` against ``targets``."""
    if not targets:
        raise BadWeights("no targets")
    weights = [t.weight for t in targets.values()]
    if any(w < 0 or not math.isfinite(w) for w in weights) or sum(weights) == 0:
        raise BadWeights(f"weights must be >= 0 and not all zero, got {weights}")
    total = 0.0
    for name, t in targets.items():
        if name not in metrics:
            raise MissingMetric(name)
        scale = max(abs(t.value), SCALE_FLOOR)
        total += t.weight * ((metrics[name] - t.value) / scale) ** 2
    return math.sqrt(total / sum(weights))


@dataclass(frozen=True)
class Param:
    path: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"parameter {self.path}: bad range [{self.lo}, {self.hi}]")

    def at(self, u: float) -> float:
        return self.lo + u * (self.hi - self.lo)


@dataclass(frozen=True)
class ParamSpace:
    params: tuple[Param, ...]

    def __post_init__(self) -> None:
        if not self.params:
            raise ValueError("empty parameter space")
        names = [p.path for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameters in {names}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> "ParamSpace":
        return cls(tuple(Param(path, float(lo), float(hi)) for path, (lo, hi) in data.items()))

    @property
    def names(self) -> list[str]:
        return [p.path for p in self.params]

    def check_against(self, config: ScenarioConfig) -> None:
        doc = config.to_dict()
        for p in self.params:
            try:
                get_path(doc, p.path)
            except (KeyError, IndexError, TypeError):
                raise ValueError(f"parameter {p.path} does not name a config field") from None


@dataclass
class CandidateResult:
    params: dict[str, float]
    discrepancy: float
    metrics: dict[str, float]
    # evaluation order; ties in discrepancy go to the earlier one
    order: int = 0
    phase: int = 1


@dataclass
class CalibrationResult:
    top: list[CandidateResult]
    evaluations: list[CandidateResult] = field(repr=False)
    phase1_size: int = 0

    @property
    def best(self) -> CandidateResult:
        return self.top[0]


def nested_lhs(n: int, dims: int, rng: random.Random) -> list[list[float]]:
    """First ``n`` points of a nested Latin hypercube in ``[0,1)^dims``."""
    points: list[list[float]] = []
    if n <= 0:
        return points
    points.append([rng.random() for _ in range(dims)])
    strata = 1
    while len(points) < n:
        strata *= 2
        fresh: list[list[float]] = [[0.0] * dims for _ in range(len(points))]
        for d in range(dims):
            taken = {int(p[d] * strata) for p in points}
            empty = [k for k in range(strata) if k not in taken]
            rng.shuffle(empty)
            for i, k in enumerate(empty):
                fresh[i][d] = (k + rng.random()) / strata
        points.extend(fresh)
    return points[:n]


Evaluator = Callable[[dict[str, float]], dict[str, float]]


def _average(outputs: Sequence[Mapping[str, float]]) -> dict[str, float]:
    keys = set(outputs[0])
    for o in outputs[1:]:
        keys &= set(o)
    return {k: math.fsum(o[k] for o in outputs) / len(outputs) for k in sorted(keys)}


@dataclass
class _SimEvaluator:
    """Picklable evaluator: run the configured scenario at given parameters."""

    config: ScenarioConfig
    replications: int
    seed: int

    def __call__(self, params: dict[str, float]) -> dict[str, float]:
        cfg = self.config.with_values(params)
        runs = []
        for i in range(self.replications):
            trace, metrics = simulate(cfg, derive_seed(self.seed, i))
            runs.append(flatten_outputs(trace, metrics))
        return _average(runs)


def make_evaluator(config: ScenarioConfig, replications_per_eval: int, seed: int) -> Evaluator:
    if replications_per_eval < 1:
        raise ValueError("replications_per_eval must be >= 1")
    return _SimEvaluator(config, replications_per_eval, seed)


def calibrate_search(
    space: ParamSpace,
    targets: Mapping[str, Target],
    budget: int,
    evaluate: Evaluator,
    seed: int,
    *,
    top_k: int = 5,
    workers: int = 1,
) -> CalibrationResult:
    """Spend ``budget`` evaluations searching ``space``; best ``top_k`` first."""
    if not isinstance(budget, int) or budget < 1:
        raise BadBudget(f"budget must be a positive integer, got {budget!r}")
    rng = RngStreams(seed).stream("calibration")
    params = space.params
    n1 = math.ceil(0.7 * budget)
    design = nested_lhs(n1, len(params), rng)

    evaluations: list[CandidateResult] = []
    seen: dict[tuple[float, ...], CandidateResult] = {}

    def record(values: tuple[float, ...], outputs: dict[str, float], phase: int) -> CandidateResult:
        assignment = dict(zip(space.names, values))
        metrics = {k: outputs[k] for k in targets if k in outputs}
        cand = CandidateResult(assignment, discrepancy(outputs, targets), metrics, len(evaluations), phase)
        evaluations.append(cand)
        seen[values] = cand
        return cand

    phase1 = [tuple(p.at(u) for p, u in zip(params, point)) for point in design]
    unique = list(dict.fromkeys(phase1))
    assignments = [dict(zip(space.names, v)) for v in unique]
    if workers > 1 and len(assignments) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(evaluate, assignments))
    else:
        outputs = [evaluate(a) for a in assignments]
    for values, out in zip(unique, outputs):
        record(values, out, 1)
    spent = len(phase1)

    best = min(evaluations, key=lambda c: (c.discrepancy, c.order))
    x = [best.params[name] for name in space.names]
    strata = 1 << max(0, math.ceil(math.log2(max(n1, 1))))
    steps = [(p.hi - p.lo) / strata for p in params]
    floor = [1e-12 * max(1.0, abs(p.hi - p.lo)) for p in params]
    while spent < budget and any(s > f for s, f in zip(steps, floor)):
        improved = False
        for d, p in enumerate(params):
            for sign in (1.0, -1.0):
                if spent >= budget or steps[d] <= floor[d]:
                    break
                trial = list(x)
                trial[d] = min(p.hi, max(p.lo, x[d] + sign * steps[d]))
                key = tuple(trial)
                if key in seen:
                    continue
                cand = record(key, evaluate(dict(zip(space.names, key))), 2)
                spent += 1
                if cand.discrepancy < best.discrepancy:
                    best, x, improved = cand, trial, True
                    break
        if not improved:
            steps = [s / 2 for s in steps]

    ranked = sorted(evaluations, key=lambda c: (c.discrepancy, c.order))
    return CalibrationResult(ranked[:top_k], evaluations, len(phase1))
