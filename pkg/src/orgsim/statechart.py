"""Flat state charts with priorities, interruption and a single resume slot.

A chart is a set of states hubbed around one idle state.  Each state has a
priority (idle is 0 and strictly lowest), an interruptibility flag and a
duration.  Triggers move an agent between states; they are either
timeouts of the current state, message-driven, or scheduled in advance.

Firing semantics (:func:`fire_trigger`):

* a timeout of the current state moves;
* a message trigger whose source is the current state moves, unless the
  current state is non-interruptible (only its own timeout may end it);
* a message trigger leaving some other non-idle state is stale and ignored;
* scheduled triggers, and message triggers leaving idle, move when the
  agent is idle and otherwise try to *preempt*: they interrupt the current state
  when that state is interruptible, nothing is already suspended, and the
  target priority is strictly higher.  Otherwise the trigger is deferred
  and the caller is expected to re-deliver it later.

Guards are names only; the hosting scenario resolves them.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union

from .rng import Distribution

__all__ = [
    "COMPUTED",
    "Computed",
    "Defect",
    "DefectKind",
    "Deferred",
    "Ignored",
    "Interrupted",
    "InvalidTransition",
    "Moved",
    "NothingToResume",
    "StateChartDef",
    "StateChartInstance",
    "StateDef",
    "TriggerDef",
    "TriggerKind",
    "fire_trigger",
    "resume_suspended",
    "validate_chart",
]


class InvalidTransition(Exception):
    """A trigger names a state the chart does not have, or cannot apply."""


class Computed:
    """Duration decided by the host at state entry."""

    _instance: Optional["Computed"] = None

    def __new__(cls) -> "Computed":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "COMPUTED"


COMPUTED = Computed()

DurationSpec = Union[float, Distribution, Computed, None]


class TriggerKind(str, enum.Enum):
    SCHEDULED = "scheduled"
    MESSAGE = "message"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class StateDef:
    id: str
    priority: int = 0
    interruptible: bool = True
    duration: DurationSpec = None


@dataclass(frozen=True)
class TriggerDef:
    name: str
    kind: TriggerKind
    source: str
    target: str
    guard: Optional[str] = None


class DefectKind(str, enum.Enum):
    MISSING_IDLE = "MissingIdle"
    UNREACHABLE_STATE = "UnreachableState"
    NO_RETURN_TO_IDLE = "NoReturnToIdle"
    DUPLICATE_ID = "DuplicateId"
    DANGLING_REFERENCE = "DanglingReference"
    MISSING_DURATION = "MissingDuration"
    IDLE_PRIORITY = "IdlePriority"


@dataclass(frozen=True)
class Defect:
    kind: DefectKind
    subject: str

    def __str__(self) -> str:
        return f"{self.kind.value}({self.subject})"


@dataclass
class StateChartDef:
    name: str
    states: tuple[StateDef, ...]
    idle_id: Optional[str]
    triggers: tuple[TriggerDef, ...]

    def __post_init__(self) -> None:
        self.states = tuple(self.states)
        self.triggers = tuple(self.triggers)
        self._by_id = {s.id: s for s in self.states}

    def state(self, state_id: str) -> StateDef:
        try:
            return self._by_id[state_id]
        except KeyError:
            raise InvalidTransition(f"chart {self.name!r} has no state {state_id!r}") from None

    def has_state(self, state_id: str) -> bool:
        return state_id in self._by_id

    def lookup(self, name: str, current: str) -> TriggerDef:
        """Trigger called ``name``, preferring the one leaving ``current``."""
        fallback = None
        for t in self.triggers:
            if t.name == name:
                if t.source == current:
                    return t
                if fallback is None:
                    fallback = t
        if fallback is None:
            raise InvalidTransition(f"chart {self.name!r} has no trigger {name!r}")
        return fallback


def _search(start: str, edges: Mapping[str, set[str]]) -> set[str]:
    seen = {start}
    todo = deque([start])
    while todo:
        node = todo.popleft()
        for nxt in sorted(edges.get(node, ())):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def validate_chart(chart: StateChartDef) -> list[Defect]:
    """Return every structural defect of ``chart``; empty means valid."""
    defects: list[Defect] = []
    ids: set[str] = set()
    for s in chart.states:
        if s.id in ids:
            defects.append(Defect(DefectKind.DUPLICATE_ID, s.id))
        ids.add(s.id)

    for t in chart.triggers:
        for end in (t.source, t.target):
            if end not in ids:
                defects.append(Defect(DefectKind.DANGLING_REFERENCE, f"{t.name}:{end}"))
        if t.kind is TriggerKind.TIMEOUT and t.source in ids:
            if chart._by_id[t.source].duration is None:
                defects.append(Defect(DefectKind.MISSING_DURATION, f"{t.name}:{t.source}"))

    if not chart.idle_id:
        defects.append(Defect(DefectKind.MISSING_IDLE, chart.name))
        return defects
    if chart.idle_id not in ids:
        defects.append(Defect(DefectKind.DANGLING_REFERENCE, f"idle:{chart.idle_id}"))
        return defects

    idle = chart._by_id[chart.idle_id]
    others = [s for s in chart.states if s.id != chart.idle_id]
    if idle.priority != 0 or any(s.priority <= 0 for s in others):
        defects.append(Defect(DefectKind.IDLE_PRIORITY, chart.idle_id))

    forward: dict[str, set[str]] = {}
    backward: dict[str, set[str]] = {}
    for t in chart.triggers:
        if t.source in ids and t.target in ids:
            forward.setdefault(t.source, set()).add(t.target)
            backward.setdefault(t.target, set()).add(t.source)
    reachable = _search(chart.idle_id, forward)
    returning = _search(chart.idle_id, backward)
    for s in others:
        if s.id not in reachable:
            defects.append(Defect(DefectKind.UNREACHABLE_STATE, s.id))
        if s.id not in returning:
            defects.append(Defect(DefectKind.NO_RETURN_TO_IDLE, s.id))
    return defects


@dataclass
class StateChartInstance:
    chart: StateChartDef
    current: str
    entered_at: float = 0.0
    # remaining work of the current state, maintained by the host
    remaining: Optional[float] = None
    suspended: Optional[tuple[str, float]] = None

    @classmethod
    def at_idle(cls, chart: StateChartDef, now: float = 0.0) -> "StateChartInstance":
        if not chart.idle_id:
            raise InvalidTransition(f"chart {chart.name!r} has no idle state")
        return cls(chart=chart, current=chart.idle_id, entered_at=now)

    @property
    def is_idle(self) -> bool:
        return self.current == self.chart.idle_id

    def enter(self, state_id: str, now: float, remaining: Optional[float] = None) -> None:
        self.chart.state(state_id)
        self.current = state_id
        self.entered_at = now
        self.remaining = remaining

    def remaining_at(self, now: float) -> float:
        """Work left at ``now``, assuming it drains one hour per hour."""
        base = self.remaining
        if base is None:
            dur = self.chart.state(self.current).duration
            base = float(dur) if isinstance(dur, (int, float)) else 0.0
        return max(0.0, base - (now - self.entered_at))


@dataclass(frozen=True)
class Moved:
    to: str
    remaining: Optional[float] = None


@dataclass(frozen=True)
class Interrupted:
    to: str
    suspended: tuple[str, float]


@dataclass(frozen=True)
class _Singleton:
    label: str

    def __repr__(self) -> str:
        return self.label


Ignored = _Singleton("Ignored")
Deferred = _Singleton("Deferred")
NothingToResume = _Singleton("NothingToResume")

Outcome = Union[Moved, Interrupted, _Singleton]
GuardResolver = Callable[[str], bool]


def fire_trigger(
    instance: StateChartInstance,
    trigger: TriggerDef,
    now: float,
    *,
    guards: Optional[GuardResolver] = None,
    remaining: Optional[float] = None,
) -> Outcome:
    """Apply ``trigger`` to ``instance`` at time ``now``.

    ``remaining`` overrides the instance's own bookkeeping of the work left
    in the current state; it is what gets saved on interruption.
    """
    chart = instance.chart
    current = chart.state(instance.current)
    chart.state(trigger.source)
    target = chart.state(trigger.target)

    if trigger.kind is TriggerKind.TIMEOUT:
        if trigger.source != instance.current:
            raise InvalidTransition(
                f"timeout {trigger.name!r} of {trigger.source!r} fired while in {instance.current!r}"
            )
        mode = "move"
    elif trigger.kind is TriggerKind.MESSAGE and trigger.source == instance.current:
        mode = "move" if current.interruptible or instance.is_idle else "defer"
    elif trigger.kind is TriggerKind.MESSAGE and trigger.source != chart.idle_id:
        # leaves a state the agent is not in: stale
        return Ignored
    elif instance.is_idle:
        mode = "move"
    elif (
        current.interruptible
        and instance.suspended is None
        and target.priority > current.priority
    ):
        mode = "interrupt"
    else:
        mode = "defer"

    if mode == "move" and instance.suspended is not None and target.id != chart.idle_id:
        if target.priority <= chart.state(instance.suspended[0]).priority:
            # the suspended state must stay outranked: completion resumes it, messages wait
            if trigger.kind is TriggerKind.TIMEOUT:
                return resume_suspended(instance, now)
            mode = "defer"

    if mode == "defer":
        return Deferred
    if trigger.guard is not None:
        if guards is None:
            raise InvalidTransition(f"trigger {trigger.name!r} needs guard {trigger.guard!r}")
        if not guards(trigger.guard):
            return Ignored

    if mode == "interrupt":
        left = instance.remaining_at(now) if remaining is None else remaining
        instance.suspended = (instance.current, left)
        instance.enter(target.id, now)
        return Interrupted(target.id, instance.suspended)
    instance.enter(target.id, now)
    return Moved(target.id)


def resume_suspended(instance: StateChartInstance, now: float) -> Outcome:
    """Return to the suspended state with its saved remaining work."""
    if instance.suspended is None:
        return NothingToResume
    state_id, left = instance.suspended
    instance.suspended = None
    instance.enter(state_id, now, remaining=left)
    return Moved(state_id, remaining=left)


def triggers_from(chart: StateChartDef, state_id: str) -> Iterable[TriggerDef]:
    return (t for t in chart.triggers if t.source == state_id)
