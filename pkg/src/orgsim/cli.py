"""Command line: ``orgsim {run,sweep,compare,calibrate,validate}``.

Exit status is 0 on success, 1 on a domain error (bad config, failed
run, bad targets), 2 on a usage error.  Diagnostics go to stderr; results
go to files in the output directory only.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import outputs
from .calibration import (
    BadBudget,
    BadWeights,
    MissingMetric,
    ParamSpace,
    calibrate_search,
    make_evaluator,
    parse_targets,
)
from .config import ConfigError, ConfigSyntaxError, ScenarioConfig, load_json, parse_scenario_config
from .design_dept import METRIC_NAMES
from .design_dept.charts import coordinator_chart, designer_chart
from .engine import SimulationAborted
from .experiment import ReplicationError, ReplicationPlan, compare_paired, run_replications, summarize
from .statechart import validate_chart

log = logging.getLogger("orgsim")

DEFAULT_SEED = 1
DEFAULT_BUDGET = 100


class DomainError(Exception):
    pass


def _default_out() -> str:
    return os.environ.get("ORGSIM_OUT", "./out")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _hours(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"horizon must be >= 0 hours, got {text}")
    return value


def _alpha(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"alpha must be in (0,1), got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orgsim",
        description="Agent-based simulation of a design department.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    config = argparse.ArgumentParser(add_help=False)
    config.add_argument("--config", required=True, metavar="PATH", help="scenario JSON file")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=DEFAULT_SEED, metavar="U64", help="base seed (default 1)")
    common.add_argument("--horizon", type=_hours, metavar="HOURS", help="override the scenario horizon")
    common.add_argument(
        "--out", default=None, metavar="DIR", help="output directory (default $ORGSIM_OUT or ./out)"
    )
    common.add_argument("--workers", type=_positive_int, default=1, metavar="N", help="parallel processes")

    reps = argparse.ArgumentParser(add_help=False)
    reps.add_argument("--replications", type=_positive_int, default=1, metavar="N", help="replications (default 1)")
    reps.add_argument("--alpha", type=_alpha, default=0.05, metavar="F", help="1 - confidence level (default 0.05)")

    p = sub.add_parser("run", parents=[config, common, reps], help="run replications of one scenario")
    p.add_argument("--trace", action="store_true", help="write agent_trace.csv")
    p.add_argument("--events-log", action="store_true", help="write the processed-event log")

    p = sub.add_parser("sweep", parents=[config, common, reps], help="run a grid of parameter values")
    p.add_argument("--sweep", required=True, metavar="PATH", help='JSON {"config.path": [values, ...]}')

    p = sub.add_parser("compare", parents=[config, common, reps], help="paired comparison B - A")
    p.add_argument("--config-b", required=True, metavar="PATH", help="scenario B")
    p.add_argument("--unpaired", action="store_true", help="give B its own seeds instead of sharing A's")

    p = sub.add_parser("calibrate", parents=[config, common], help="search inputs to match target outputs")
    p.add_argument("--targets", required=True, metavar="PATH", help="targets and parameter ranges (JSON)")
    p.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET, metavar="N", help="evaluations (default 100)")

    sub.add_parser("validate", parents=[config], help="check a scenario file")
    return parser


def _load(path: str, horizon: Optional[float] = None) -> ScenarioConfig:
    cfg = parse_scenario_config(path)
    return cfg.with_horizon(horizon) if horizon is not None else cfg


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out if args.out is not None else _default_out())


def cmd_run(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.horizon)
    plan = ReplicationPlan(args.replications, args.seed)
    records = run_replications(
        cfg, plan, keep_trace=args.trace or args.events_log, record_events=args.events_log, workers=args.workers
    )
    out = _out_dir(args)
    outputs.write_run_summary(out / "run_summary.csv", records)
    stats = {m: summarize([r.metrics[m] for r in records], args.alpha) for m in METRIC_NAMES}
    outputs.write_metric_summary(out / "metric_summary.csv", stats)
    single = len(records) == 1
    for r in records:
        assert r.trace is not None or not (args.trace or args.events_log)
        if args.trace:
            name = "agent_trace.csv" if single else f"agent_trace_rep{r.index}.csv"
            outputs.write_agent_trace(out / name, r.trace)  # type: ignore[arg-type]
        if args.events_log:
            name = "events.log" if single else f"events_rep{r.index}.log"
            outputs.write_events_log(out / name, r.trace.events or [])  # type: ignore[union-attr]


def cmd_sweep(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.horizon)
    grid = load_json(args.sweep)
    if not isinstance(grid, dict) or not grid or not all(isinstance(v, list) and v for v in grid.values()):
        raise DomainError(f"{args.sweep}: expected an object mapping config paths to non-empty value lists")
    names = list(grid)
    plan = ReplicationPlan(args.replications, args.seed)
    points = []
    for values in itertools.product(*grid.values()):
        try:
            point_cfg = cfg.with_values(dict(zip(names, values)))
        except KeyError as exc:
            raise DomainError(f"{args.sweep}: unknown config path {exc}") from None
        records = run_replications(point_cfg, plan, workers=args.workers)
        stats = {m: summarize([r.metrics[m] for r in records], args.alpha) for m in METRIC_NAMES}
        points.append((values, stats))
        log.info("sweep point %s done", dict(zip(names, values)))
    outputs.write_sweep_summary(_out_dir(args) / "sweep_summary.csv", names, points)


def cmd_compare(args: argparse.Namespace) -> None:
    cfg_a = _load(args.config, args.horizon)
    cfg_b = _load(args.config_b, args.horizon)
    plan = ReplicationPlan(args.replications, args.seed, paired=not args.unpaired)
    result = compare_paired(cfg_a, cfg_b, plan, alpha=args.alpha, workers=args.workers)
    out = _out_dir(args)
    outputs.write_compare_summary(out / "compare_summary.csv", result)
    outputs.write_run_summary(out / "run_summary_a.csv", result.records_a)
    outputs.write_run_summary(out / "run_summary_b.csv", result.records_b)


def _read_calibration_spec(path: str) -> tuple[dict[str, Any], ParamSpace, int, int]:
    spec = load_json(path)
    if not isinstance(spec, dict) or "targets" not in spec or "parameters" not in spec:
        raise DomainError(f"{path}: expected an object with 'targets' and 'parameters'")
    try:
        targets = parse_targets(spec["targets"])
        space = ParamSpace.from_dict(spec["parameters"])
    except (TypeError, ValueError, KeyError) as exc:
        raise DomainError(f"{path}: {exc}") from None
    return targets, space, int(spec.get("replications_per_eval", 1)), int(spec.get("top_k", 5))


def cmd_calibrate(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.horizon)
    targets, space, reps, top_k = _read_calibration_spec(args.targets)
    try:
        space.check_against(cfg)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    evaluate = make_evaluator(cfg, reps, args.seed)
    result = calibrate_search(space, targets, args.budget, evaluate, args.seed, top_k=top_k, workers=args.workers)
    outputs.write_calibration_report(_out_dir(args) / "calibration_report.csv", result, space.names)
    log.info("best discrepancy %.6g at %s", result.best.discrepancy, result.best.params)


def cmd_validate(args: argparse.Namespace) -> None:
    cfg = parse_scenario_config(args.config)
    c = cfg.constants
    charts = [
        designer_chart(c["support_wait"], c["support_duration"]),
        coordinator_chart("supervisor", c["allocation_time"]),
        coordinator_chart("manager", c["allocation_time"]),
    ]
    defects = [f"{chart.name}: {d}" for chart in charts for d in validate_chart(chart)]
    if defects:
        raise DomainError("chart defects:\n  " + "\n  ".join(defects))
    print(f"{args.config}: ok", file=sys.stderr)


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
}

DOMAIN_ERRORS = (
    DomainError,
    ConfigError,
    ConfigSyntaxError,
    FileNotFoundError,
    SimulationAborted,
    ReplicationError,
    BadBudget,
    BadWeights,
    MissingMetric,
    outputs.OutputError,
)


def execute_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: invalid scenario {getattr(args, 'config', '')}", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return 1
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(execute_command())
