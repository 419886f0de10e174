"""CSV and log writers.  Every file is written to a temp file then renamed."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

from .calibration import CalibrationResult
from .design_dept import METRIC_NAMES, RunTrace
from .experiment import PairedComparison, ReplicationRecord, SummaryStats

INTEGER_METRICS = {"contracts_arrived", "contracts_completed"}
RUN_SUMMARY_COLUMNS = ("replication", "seed", *METRIC_NAMES)
STATS_COLUMNS = ("n", "mean", "sd", "ci_low", "ci_high", "alpha")


class OutputError(OSError):
    def __init__(self, path: Path, cause: BaseException):
        self.path = path
        super().__init__(f"cannot write {path}: {cause}")


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        out = f"{value:.6f}"
        return "0.000000" if out == "-0.000000" else out
    return str(value)


def atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _metric_cell(name: str, value: float) -> Any:
    return int(round(value)) if name in INTEGER_METRICS else float(value)


def write_run_summary(path: Path, records: Sequence[ReplicationRecord]) -> Path:
    rows = [
        [r.index, r.seed, *(_metric_cell(m, r.metrics[m]) for m in METRIC_NAMES)] for r in records
    ]
    return write_csv(path, RUN_SUMMARY_COLUMNS, rows)


def _stats_cells(s: SummaryStats) -> list[Any]:
    return [s.n, s.mean, s.sd, s.ci_low, s.ci_high, s.alpha]


def write_metric_summary(path: Path, stats: dict[str, SummaryStats]) -> Path:
    rows = [[name, *_stats_cells(s)] for name, s in stats.items()]
    return write_csv(path, ("metric", *STATS_COLUMNS), rows)


def write_agent_trace(path: Path, trace: RunTrace) -> Path:
    rows = [[float(t), agent, attr, float(v)] for t, agent, attr, v in trace.samples]
    return write_csv(path, ("time", "agent_id", "attribute", "value"), rows)


def write_events_log(path: Path, lines: Sequence[str]) -> Path:
    return atomic_write(path, "".join(line + "\n" for line in lines))


def write_compare_summary(path: Path, comparison: PairedComparison) -> Path:
    rows = []
    for name, s in comparison.stats.items():
        mean_a = sum(r.outputs[name] for r in comparison.records_a) / len(comparison.records_a)
        mean_b = sum(r.outputs[name] for r in comparison.records_b) / len(comparison.records_b)
        rows.append([name, s.n, mean_a, mean_b, s.mean, s.sd, s.ci_low, s.ci_high, s.alpha])
    header = ("metric", "n", "mean_a", "mean_b", "mean_diff", "sd_diff", "ci_low", "ci_high", "alpha")
    return write_csv(path, header, rows)


def write_sweep_summary(
    path: Path, names: Sequence[str], points: Sequence[tuple[Sequence[Any], dict[str, SummaryStats]]]
) -> Path:
    rows = []
    for i, (values, stats) in enumerate(points):
        for metric, s in stats.items():
            rows.append([i, *values, metric, *_stats_cells(s)])
    return write_csv(path, ("point", *names, "metric", *STATS_COLUMNS), rows)


def write_calibration_report(path: Path, result: CalibrationResult, param_names: Sequence[str]) -> Path:
    metric_names = sorted({m for c in result.top for m in c.metrics})
    rows = [
        [rank, c.discrepancy, *(float(c.params[p]) for p in param_names), *(c.metrics.get(m, "") for m in metric_names)]
        for rank, c in enumerate(result.top, start=1)
    ]
    return write_csv(path, ("rank", "discrepancy", *param_names, *metric_names), rows)
