"""Reactive agents: identity, attributes, traits and the stimulus loop.

An agent never decides anything on its own initiative.  Every stimulus
(message, state timeout, scheduled event) is looked up in a role-specific
rule table supplied by the scenario, and the matching rule returns an
ordered list of actions for the engine to apply.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence, Union

from .rng import BadDistributionParams, RngStreams, dist_from_json
from .statechart import StateChartDef, StateChartInstance

__all__ = [
    "CATEGORIES",
    "Agent",
    "AgentId",
    "Attributes",
    "BadStereotype",
    "FireTrigger",
    "Role",
    "ScheduleEvent",
    "SendMessage",
    "Stimulus",
    "StimulusKind",
    "Traits",
    "UpdateAttribute",
    "clamp01",
    "init_agent_from_stereotype",
    "react",
]

log = logging.getLogger(__name__)

CATEGORIES = ("planning", "design", "testing")
TRAIT_NAMES = ("willingness_to_support", "willingness_to_communicate", "base_productivity")


class BadStereotype(ValueError):
    pass


def clamp01(x: float) -> float:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


class Role(str, enum.Enum):
    MANAGER = "manager"
    SUPERVISOR = "supervisor"
    DESIGNER = "designer"


_ROLE_ORDER = {Role.MANAGER: 0, Role.SUPERVISOR: 1, Role.DESIGNER: 2}


@dataclass(frozen=True)
class AgentId:
    role: Role
    team: Optional[int] = None
    index: int = 0

    def __post_init__(self) -> None:
        if self.role is Role.MANAGER and self.team is not None:
            raise ValueError("the manager belongs to no team")
        if self.role is not Role.MANAGER and self.team is None:
            raise ValueError(f"{self.role.value} needs a team")

    def sort_key(self) -> tuple[int, int, int]:
        return (_ROLE_ORDER[self.role], -1 if self.team is None else self.team, self.index)

    def __lt__(self, other: "AgentId") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if self.role is Role.MANAGER:
            return "manager"
        if self.role is Role.SUPERVISOR:
            return f"supervisor-{self.team}"
        return f"designer-{self.team}-{self.index}"


@dataclass
class Attributes:
    knowledge: dict[str, float]
    communication: float
    productivity: float

    def clamp(self) -> None:
        for cat in self.knowledge:
            self.knowledge[cat] = clamp01(self.knowledge[cat])
        self.communication = clamp01(self.communication)
        self.productivity = clamp01(self.productivity)

    def levels(self) -> list[float]:
        return [self.knowledge[c] for c in CATEGORIES] + [self.communication, self.productivity]

    def named_levels(self) -> list[tuple[str, float]]:
        out = [(f"knowledge.{c}", self.knowledge[c]) for c in CATEGORIES]
        out.append(("communication", self.communication))
        out.append(("productivity", self.productivity))
        return out

    def get(self, name: str) -> float:
        if name.startswith("knowledge."):
            return self.knowledge[name.split(".", 1)[1]]
        return float(getattr(self, name))

    def set(self, name: str, value: float) -> None:
        value = clamp01(value)
        if name.startswith("knowledge."):
            cat = name.split(".", 1)[1]
            if cat not in self.knowledge:
                raise KeyError(name)
            self.knowledge[cat] = value
        elif name in ("communication", "productivity"):
            setattr(self, name, value)
        else:
            raise KeyError(name)


@dataclass(frozen=True)
class Traits:
    willingness_to_support: float
    willingness_to_communicate: float
    base_productivity: float


class StimulusKind(str, enum.Enum):
    MESSAGE = "message"
    TIMEOUT = "timeout"
    SCHEDULED = "scheduled"


@dataclass(frozen=True)
class Stimulus:
    kind: StimulusKind
    name: str
    payload: Any = None
    sender: Optional[AgentId] = None


@dataclass(frozen=True)
class FireTrigger:
    name: str
    # only for states whose duration is computed at entry
    duration: Optional[float] = None


@dataclass(frozen=True)
class SendMessage:
    to: AgentId
    kind: str
    payload: Any = None


@dataclass(frozen=True)
class ScheduleEvent:
    delay: float
    kind: str
    payload: Any = None


@dataclass(frozen=True)
class UpdateAttribute:
    name: str
    value: float


Action = Union[FireTrigger, SendMessage, ScheduleEvent, UpdateAttribute]
Rule = Callable[["Agent", Stimulus, Any], Sequence[Action]]


@dataclass
class Agent:
    id: AgentId
    attributes: Attributes
    traits: Traits
    chart: StateChartInstance
    rules: Mapping[str, Rule] = field(default_factory=dict)
    # stimuli whose trigger was deferred; redelivered by the host
    deferred: list[Stimulus] = field(default_factory=list)
    # bumped on every state entry; stale timeouts carry an older value
    epoch: int = 0

    @property
    def state(self) -> str:
        return self.chart.current


def react(agent: Agent, stimulus: Stimulus, ctx: Any) -> list[Action]:
    rule = agent.rules.get(stimulus.name)
    if rule is None:
        log.debug("%s: unhandled stimulus %s/%s", agent.id, stimulus.kind.value, stimulus.name)
        return []
    return list(rule(agent, stimulus, ctx))


def apply_attribute_update(agent: Agent, update: UpdateAttribute) -> None:
    agent.attributes.set(update.name, update.value)


def _level(block: Mapping[str, Any], key: str, streams: RngStreams, stream: str, where: str) -> float:
    if key not in block:
        raise BadStereotype(f"{where}: missing {key!r}")
    raw = block[key]
    try:
        dist = dist_from_json(raw)
    except BadDistributionParams as exc:
        raise BadStereotype(f"{where}.{key}: {exc}") from None
    if isinstance(raw, (int, float)) and not 0.0 <= raw <= 1.0:
        raise BadStereotype(f"{where}.{key}: {raw} outside [0,1]")
    return clamp01(streams.draw(stream, dist))


def init_agent_from_stereotype(
    agent_id: AgentId,
    stereotype: Mapping[str, Any],
    streams: RngStreams,
    chart: StateChartDef,
    rules: Optional[Mapping[str, Rule]] = None,
) -> Agent:
    """Build an agent from a stereotype block, drawing from ``init:<agent>``.

    The stereotype carries start-up levels (``knowledge`` per category,
    ``communication``, ``productivity``) and a ``traits`` block; each value is
    a number in [0,1] or a distribution, sampled in a fixed order then
    clamped.  ``knowledge`` may be one number applying to every category.
    """
    where = str(agent_id)
    stream = f"init:{agent_id}"
    knowledge_block = stereotype.get("knowledge")
    if knowledge_block is None:
        raise BadStereotype(f"{where}: missing 'knowledge'")
    if not isinstance(knowledge_block, Mapping):
        knowledge_block = {c: knowledge_block for c in CATEGORIES}
    knowledge = {
        c: _level(knowledge_block, c, streams, stream, f"{where}.knowledge") for c in CATEGORIES
    }
    communication = _level(stereotype, "communication", streams, stream, where)
    productivity = _level(stereotype, "productivity", streams, stream, where)
    traits_block = stereotype.get("traits")
    if not isinstance(traits_block, Mapping):
        raise BadStereotype(f"{where}: missing 'traits'")
    traits = Traits(
        *(_level(traits_block, name, streams, stream, f"{where}.traits") for name in TRAIT_NAMES)
    )
    return Agent(
        id=agent_id,
        attributes=Attributes(knowledge, communication, productivity),
        traits=traits,
        chart=StateChartInstance.at_idle(chart),
        rules=dict(rules or {}),
    )
