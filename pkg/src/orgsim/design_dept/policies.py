"""Work-rate, allocation, support, attribute-evolution and cost rules.

These are plain functions over agents and domain objects so they can be
tested (and reused) without a running simulation.  All functional forms
are deliberately the simplest ones that give the intended directions:
teamwork-heavy work with poor communicators is slow, a good communicator
lifts the team, and the newcomer drifts down towards the team.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

from ..agent import Agent, AgentId, clamp01
from ..rng import Bernoulli, RngStreams
from .domain import Activity, SupportSession

__all__ = [
    "Accepted",
    "Unsupported",
    "accrue_cost",
    "apply_work_progress",
    "effective_rate",
    "evolve_attributes",
    "pick_designer",
    "pick_team",
    "request_support",
    "transfer_knowledge",
]


def mean_communication(members: Sequence[Agent]) -> float:
    return sum(a.attributes.communication for a in members) / len(members)


def effective_rate(
    designer: Agent,
    activity: Activity,
    team: Sequence[Agent],
    *,
    supported: bool = False,
    g_supported: float = 0.9,
    g_unsupported: float = 0.5,
) -> float:
    """Effort-hours completed per hour by ``designer`` on ``activity``.

    ``r = p * g * ((1 - tau) + tau * m_team)`` where ``m_team`` is the mean
    communication of ``team`` (designer included) and ``g`` is 1 when the
    designer's knowledge meets the requirement, ``g_supported`` while a
    colleague is helping, ``g_unsupported`` otherwise.
    """
    attrs = designer.attributes
    if attrs.knowledge[activity.category] >= activity.required_knowledge:
        g = 1.0
    else:
        g = g_supported if supported else g_unsupported
    tau = activity.teamwork
    return attrs.productivity * g * ((1.0 - tau) + tau * mean_communication(team))


def pick_team(loads: Sequence[float]) -> int:
    """Team with the least remaining effort; lowest index on ties."""
    if not loads:
        raise ValueError("no teams")
    return min(range(len(loads)), key=lambda i: (loads[i], i))


def pick_designer(rates: Mapping[AgentId, float]) -> Optional[AgentId]:
    """Highest rate among the available designers; lowest index on ties."""
    if not rates:
        return None
    return min(rates, key=lambda d: (-rates[d], d.sort_key()))


@dataclass(frozen=True)
class Accepted:
    session: SupportSession


@dataclass(frozen=True)
class _Unsupported:
    def __repr__(self) -> str:
        return "Unsupported"


Unsupported = _Unsupported()
SupportOutcome = Union[Accepted, _Unsupported]


def support_candidates(requester: Agent, activity: Activity, team: Sequence[Agent]) -> list[Agent]:
    cat = activity.category
    qualified = [
        a
        for a in team
        if a.id != requester.id and a.attributes.knowledge[cat] >= activity.required_knowledge
    ]
    return sorted(qualified, key=lambda a: (-a.attributes.knowledge[cat], a.id.sort_key()))


def request_support(
    requester: Agent,
    activity: Activity,
    team: Sequence[Agent],
    streams: RngStreams,
    *,
    is_available: Callable[[Agent], bool],
    now: float,
    duration: float,
) -> SupportOutcome:
    """Ask qualified teammates in turn until one accepts.

    Candidates are the same-team designers whose knowledge meets the
    requirement, most knowledgeable first.  A busy candidate is skipped
    without drawing; an available one accepts with probability equal to
    its willingness to support, drawn from its own decision stream.
    """
    for cand in support_candidates(requester, activity, team):
        if not is_available(cand):
            continue
        willing = Bernoulli(cand.traits.willingness_to_support)
        if streams.draw(f"decisions:{cand.id}", willing) == 1.0:
            return Accepted(
                SupportSession(
                    requester=requester.id,
                    supporter=cand.id,
                    activity_id=activity.id,
                    starts=now,
                    duration=duration,
                    supporter_knowledge=cand.attributes.knowledge[activity.category],
                    required_knowledge=activity.required_knowledge,
                )
            )
    return Unsupported


def apply_work_progress(remaining: float, rate: float, elapsed: float) -> float:
    return max(0.0, remaining - rate * elapsed)


def transfer_knowledge(requester_level: float, supporter_level: float, eta_k: float) -> float:
    return clamp01(requester_level + eta_k * (supporter_level - requester_level))


WORKING = "working"
MEETING = "meeting"


def evolve_attributes(
    designers: Sequence[Agent],
    dt: float,
    context: Mapping[AgentId, str],
    *,
    eta_m: float,
    eta_p: float,
    kappa_meet: float,
    active_category: Optional[Mapping[AgentId, str]] = None,
) -> None:
    """Advance communication and productivity of one team by ``dt`` hours.

    ``context`` maps a designer to ``"working"``, ``"meeting"`` or anything
    else.  All updates read the pre-step values.  The pull towards the
    others' mean is computed as the mean of pairwise differences so that a
    homogeneous team is an exact fixed point.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    active_category = active_category or {}
    comm = [d.attributes.communication for d in designers]
    prod = [d.attributes.productivity for d in designers]
    n = len(designers)
    for i, d in enumerate(designers):
        ctx = context.get(d.id, "")
        if n > 1:
            pull = sum(comm[j] - comm[i] for j in range(n) if j != i) / (n - 1)
            dt_eff = dt * kappa_meet if ctx == MEETING else dt
            d.attributes.communication = clamp01(
                comm[i] + eta_m * d.traits.willingness_to_communicate * pull * dt_eff
            )
        if ctx == WORKING and d.id in active_category:
            target = 0.5 * (d.attributes.knowledge[active_category[d.id]] + comm[i])
        else:
            target = d.traits.base_productivity
        d.attributes.productivity = clamp01(prod[i] + eta_p * (target - prod[i]) * dt)


def accrue_cost(skill_means: Sequence[float], dt: float, cost_base: float, cost_skill: float) -> float:
    """Wage bill over ``dt`` hours: each agent costs ``a + b * mean start-up skill``."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    return sum((cost_base + cost_skill * s) * dt for s in skill_means)
