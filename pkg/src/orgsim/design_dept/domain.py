"""Contracts, activities, teams and support sessions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..agent import AgentId


class ContractStatus(str, enum.Enum):
    QUEUED = "queued"
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"


_NEXT_STATUS = {
    ContractStatus.QUEUED: {ContractStatus.IN_PROGRESS},
    ContractStatus.IN_PROGRESS: {ContractStatus.COMPLETED, ContractStatus.FAILED},
    ContractStatus.COMPLETED: set(),
    ContractStatus.FAILED: set(),
}


@dataclass
class Activity:
    id: str
    contract_id: str
    category: str
    effort: float
    required_knowledge: float
    teamwork: float
    remaining: float = -1.0
    assignee: Optional[AgentId] = None
    completed_at: Optional[float] = None
    # (rate, elapsed) for every Working segment spent on this activity
    segments: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.effort <= 0:
            raise ValueError(f"activity {self.id}: effort must be > 0")
        if self.remaining < 0:
            self.remaining = self.effort

    @property
    def done(self) -> bool:
        return self.completed_at is not None


@dataclass
class Contract:
    id: str
    arrival_time: float
    deadline: float
    teamwork: float
    activities: list[Activity]
    status: ContractStatus = ContractStatus.QUEUED
    team: Optional[int] = None
    completed_at: Optional[float] = None

    def __post_init__(self) -> None:
        if self.deadline <= self.arrival_time:
            raise ValueError(f"contract {self.id}: deadline must follow arrival")

    def set_status(self, status: ContractStatus) -> None:
        if status not in _NEXT_STATUS[self.status]:
            raise ValueError(f"contract {self.id}: {self.status.value} -> {status.value} not allowed")
        self.status = status

    @property
    def effort(self) -> float:
        return sum(a.effort for a in self.activities)

    def remaining_effort(self) -> float:
        return sum(a.remaining for a in self.activities)


@dataclass
class Team:
    index: int
    supervisor: AgentId
    designers: list[AgentId]
    # unallocated activities, FIFO
    queue: list[Activity] = field(default_factory=list)
    contracts: list[Contract] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.designers:
            raise ValueError(f"team {self.index} needs at least one designer")

    def load(self) -> float:
        """Remaining effort over queued and in-progress contracts of this team."""
        return sum(
            c.remaining_effort()
            for c in self.contracts
            if c.status in (ContractStatus.QUEUED, ContractStatus.IN_PROGRESS)
        )


@dataclass
class SupportSession:
    requester: AgentId
    supporter: AgentId
    activity_id: str
    starts: float
    duration: float
    supporter_knowledge: float
    required_knowledge: float
    active: bool = False
    ended: bool = False

    def __post_init__(self) -> None:
        if self.requester == self.supporter:
            raise ValueError("a designer cannot support themself")
