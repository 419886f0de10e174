"""Run traces and the summary metrics computed from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

METRIC_NAMES = (
    "contracts_arrived",
    "contracts_completed",
    "on_time_fraction",
    "mean_tardiness_h",
    "mean_team_productivity",
    "total_cost",
    "productivity_per_cost",
)


@dataclass
class ContractRecord:
    id: str
    arrival_time: float
    deadline: float
    effort: float
    status: str
    completed_at: Optional[float] = None


@dataclass
class ActivityRecord:
    id: str
    contract_id: str
    effort: float
    completed_at: Optional[float]
    segments: list[tuple[float, float]]


@dataclass
class SessionRecord:
    requester: str
    supporter: str
    activity_id: str
    starts: float
    duration: float
    supporter_knowledge: float
    required_knowledge: float


@dataclass
class RunTrace:
    horizon: float
    designer_count: int
    contracts: list[ContractRecord] = field(default_factory=list)
    activities: list[ActivityRecord] = field(default_factory=list)
    sessions: list[SessionRecord] = field(default_factory=list)
    # integral over [0, horizon] of the summed rates of Working designers
    productivity_area: float = 0.0
    total_cost: float = 0.0
    initial_attributes: dict[str, dict[str, float]] = field(default_factory=dict)
    final_attributes: dict[str, dict[str, float]] = field(default_factory=dict)
    final_states: dict[str, str] = field(default_factory=dict)
    # (time, agent_id, attribute, value)
    samples: list[tuple[float, str, str, float]] = field(default_factory=list)
    events: Optional[list[str]] = None


def collect_metrics(trace: RunTrace) -> dict[str, float]:
    arrived = len(trace.contracts)
    done = [c for c in trace.contracts if c.completed_at is not None]
    on_time = sum(1 for c in done if c.completed_at <= c.deadline)  # type: ignore[operator]
    lateness = [c.completed_at - c.deadline for c in done if c.completed_at > c.deadline]  # type: ignore[operator]
    if trace.horizon > 0 and trace.designer_count > 0:
        productivity = trace.productivity_area / (trace.horizon * trace.designer_count)
    else:
        productivity = 0.0
    completed_effort = sum(a.effort for a in trace.activities if a.completed_at is not None)
    return {
        "contracts_arrived": float(arrived),
        "contracts_completed": float(len(done)),
        "on_time_fraction": on_time / arrived if arrived else 0.0,
        "mean_tardiness_h": sum(lateness) / len(lateness) if lateness else 0.0,
        "mean_team_productivity": productivity,
        "total_cost": trace.total_cost,
        "productivity_per_cost": completed_effort / trace.total_cost if trace.total_cost > 0 else 0.0,
    }


def flatten_outputs(trace: RunTrace, metrics: dict[str, float]) -> dict[str, float]:
    """Summary metrics plus per-agent final levels, e.g. ``final.designer-0-1.communication``."""
    out = dict(metrics)
    designer_comm = []
    for agent, levels in trace.final_attributes.items():
        for name, value in levels.items():
            out[f"final.{agent}.{name}"] = value
        if agent.startswith("designer-"):
            designer_comm.append(levels["communication"])
    if designer_comm:
        out["mean_final_communication"] = sum(designer_comm) / len(designer_comm)
    return out
