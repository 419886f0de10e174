"""Discrete-event kernel: clock, future-event list, message routing, run loop.

Events are totally ordered by ``(time, -priority, seq)``: earlier first,
then higher priority, then insertion order.  ``seq`` comes from a per-queue
counter, so two runs that push the same events in the same order pop them
in the same order.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .agent import Agent, AgentId, Role
from .rng import RngStreams
from .statechart import InvalidTransition

__all__ = [
    "Event",
    "EventQueue",
    "Message",
    "RoutingError",
    "Simulation",
    "SimulationAborted",
    "TimeTravel",
    "format_event_line",
    "may_talk",
    "pop_next",
    "push_event",
    "run_model",
]


class TimeTravel(ValueError):
    """An event was scheduled before the current clock."""


class RoutingError(Exception):
    """A message violates the organisational hierarchy."""


class SimulationAborted(RuntimeError):
    """The run loop hit an invalid transition; carries the offending event."""


@dataclass
class Event:
    time: float
    kind: str
    target: str
    payload: Any = None
    priority: int = 0
    seq: int = -1


class EventQueue:
    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, Event]] = []
        self._counter = itertools.count()
        self.clock = 0.0

    def push(self, event: Event) -> Event:
        if not math.isfinite(event.time):
            raise TimeTravel(f"event time must be finite, got {event.time}")
        if event.time < self.clock:
            raise TimeTravel(f"event at t={event.time} is before the clock t={self.clock}")
        event.seq = next(self._counter)
        heapq.heappush(self._heap, (event.time, -event.priority, event.seq, event))
        return event

    def schedule(self, time: float, kind: str, target: str, payload: Any = None, priority: int = 0) -> Event:
        return self.push(Event(time, kind, target, payload, priority))

    def pop(self) -> Optional[Event]:
        if not self._heap:
            return None
        event = heapq.heappop(self._heap)[3]
        self.clock = event.time
        return event

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


def push_event(queue: EventQueue, event: Event) -> EventQueue:
    queue.push(event)
    return queue


def pop_next(queue: EventQueue) -> Optional[Event]:
    """Earliest event under ``(time, -priority, seq)``, or None when empty."""
    return queue.pop()


@dataclass(frozen=True)
class Message:
    sender: AgentId
    to: AgentId
    kind: str
    payload: Any = None
    send_time: float = 0.0


def may_talk(a: AgentId, b: AgentId) -> bool:
    """Whether the hierarchy lets ``a`` address ``b`` directly."""
    if a == b:
        return False
    roles = {a.role, b.role}
    if roles == {Role.MANAGER, Role.SUPERVISOR}:
        return True
    if a.role is Role.SUPERVISOR and b.role is Role.SUPERVISOR:
        return True
    if roles == {Role.SUPERVISOR, Role.DESIGNER}:
        return a.team == b.team
    if a.role is Role.DESIGNER and b.role is Role.DESIGNER:
        return a.team == b.team
    return False


MESSAGE_PRIORITY = 2


class Simulation:
    """Base for scenario models driven by :func:`run_model`.

    Subclasses populate ``agents`` and the queue, and implement
    :meth:`handle` and :meth:`finish`.
    """

    def __init__(self, streams: RngStreams) -> None:
        self.queue = EventQueue()
        self.streams = streams
        self.agents: dict[AgentId, Agent] = {}

    @property
    def now(self) -> float:
        return self.queue.clock

    def route_message(self, msg: Message) -> Event:
        for who in (msg.sender, msg.to):
            if who not in self.agents:
                raise RoutingError(f"unknown agent {who}")
        if not may_talk(msg.sender, msg.to):
            raise RoutingError(f"HierarchyViolation: {msg.sender} may not address {msg.to}")
        return self.queue.schedule(
            self.now, f"msg:{msg.kind}", str(msg.to), msg, priority=MESSAGE_PRIORITY
        )

    def handle(self, event: Event) -> None:
        raise NotImplementedError

    def finish(self, horizon: float) -> Any:
        raise NotImplementedError


def format_event_line(event: Event) -> str:
    return f"{event.time:.6f}\t{event.seq}\t{event.kind}\t{event.target}"


def run_model(
    model: Simulation,
    horizon: float,
    *,
    event_log: Optional[list[str]] = None,
    observer: Optional[Callable[[Simulation, Event], None]] = None,
) -> Any:
    """Process events in order until the queue drains or passes ``horizon``."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    queue = model.queue
    while True:
        t = queue.peek_time()
        if t is None or t > horizon:
            break
        event = queue.pop()
        assert event is not None
        try:
            model.handle(event)
        except InvalidTransition as exc:
            raise SimulationAborted(
                f"invalid transition at t={event.time:.6f} handling {event.kind} "
                f"for {event.target} (seq {event.seq}): {exc}"
            ) from exc
        if event_log is not None:
            event_log.append(format_event_line(event))
        if observer is not None:
            observer(model, event)
    return model.finish(horizon)
