"""The design department as a running simulation.

One manager receives contracts and hands each to the least-loaded team.
Each supervisor allocates its team's activities to idle designers.
Designers work, ask teammates for help when they lack the knowledge,
help others, and attend team meetings.  Communication and productivity
drift every ``evolve_step`` hours; knowledge moves only when a support
session ends.

Rules (what an agent *decides*) are pure functions in ``RULES``; the
model's entry/exit hooks carry the bookkeeping that follows from a state
change (work progress, completion, allocation passes, support sessions).
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Optional, Sequence

from ..agent import (
    Agent,
    AgentId,
    FireTrigger,
    Role,
    ScheduleEvent,
    SendMessage,
    Stimulus,
    StimulusKind,
    UpdateAttribute,
    apply_attribute_update,
    init_agent_from_stereotype,
    react,
)
from ..config import ScenarioConfig
from ..engine import Event, Message, Simulation, run_model
from ..rng import Distribution, RngStreams
from ..statechart import (
    COMPUTED,
    Deferred,
    Interrupted,
    Moved,
    TriggerKind,
    fire_trigger,
    resume_suspended,
    validate_chart,
)
from . import charts
from .charts import ALLOCATING, IDLE, MEETING, SEEKING, SUPPORTING, WORKING
from .domain import Activity, Contract, ContractStatus, SupportSession, Team
from .metrics import (
    ActivityRecord,
    ContractRecord,
    RunTrace,
    SessionRecord,
    collect_metrics,
)
from .policies import (
    Accepted,
    accrue_cost,
    apply_work_progress,
    effective_rate,
    evolve_attributes,
    pick_designer,
    pick_team,
    request_support,
    transfer_knowledge,
)

log = logging.getLogger(__name__)

TIMEOUT_PRIORITY = 3
REPLAY_PRIORITY = 2
ARRIVAL_PRIORITY = 1
MEETING_PRIORITY = 1
EVOLVE_PRIORITY = 0
SAMPLE_PRIORITY = -1

MIN_DRAW = 1e-6


# --------------------------------------------------------------------------
# rules: (agent, stimulus, model) -> actions, no side effects on the model
# --------------------------------------------------------------------------


def _task_assigned(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    task = m.tasks.get(agent.id)
    if task is None:
        return []
    if not agent.chart.is_idle:
        return [FireTrigger("start_work")]
    if m.knows_enough(agent, task):
        return [FireTrigger("start_work")]
    outcome = request_support(
        agent,
        task,
        m.team_agents(agent.id.team),
        m.streams,
        is_available=m.is_available,
        now=m.now,
        duration=m.constants["support_duration"],
    )
    if isinstance(outcome, Accepted):
        return [
            FireTrigger("seek_support"),
            SendMessage(outcome.session.supporter, "SupportRequest", outcome.session),
        ]
    return [FireTrigger("seek_support"), FireTrigger("support_resolved")]


def _support_request(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    session: SupportSession = stim.payload
    if agent.chart.is_idle and agent.id not in m.tasks:
        return [FireTrigger("give_support"), SendMessage(session.requester, "SupportAccepted", session)]
    return [SendMessage(session.requester, "SupportDeclined", session)]


def _resolve_support(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    return [FireTrigger("support_resolved")]


def _meeting(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    end = stim.payload
    if end <= m.now:
        return []
    return [FireTrigger("meeting", duration=end - m.now)]


def _fire(name: str) -> Callable[[Agent, Stimulus, Any], list]:
    def rule(agent: Agent, stim: Stimulus, m: Any) -> list:
        return [FireTrigger(name)]

    rule.__name__ = f"fire_{name}"
    return rule


def _team_ready(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    team = m.teams[agent.id.team]
    if team.queue and m.available_designers(team):
        return [FireTrigger("allocate")]
    return []


def _contract_arrived(agent: Agent, stim: Stimulus, m: "DepartmentModel") -> list:
    return [FireTrigger("allocate")] if m.backlog else []


DESIGNER_RULES = {
    "TaskAssigned": _task_assigned,
    "SupportRequest": _support_request,
    "SupportAccepted": _resolve_support,
    "SupportDeclined": _resolve_support,
    "meeting": _meeting,
    f"timeout:{WORKING}": _fire("work_done"),
    f"timeout:{SEEKING}": _fire("support_timeout"),
    f"timeout:{SUPPORTING}": _fire("support_done"),
    f"timeout:{MEETING}": _fire("meeting_over"),
}

SUPERVISOR_RULES = {
    "ContractAssigned": _team_ready,
    "Available": _team_ready,
    "meeting": _meeting,
    f"timeout:{ALLOCATING}": _fire("allocation_done"),
    f"timeout:{MEETING}": _fire("meeting_over"),
}

MANAGER_RULES = {
    "contract_arrived": _contract_arrived,
    f"timeout:{ALLOCATING}": _fire("allocation_done"),
    f"timeout:{MEETING}": _fire("meeting_over"),
}


class DepartmentModel(Simulation):
    def __init__(self, config: ScenarioConfig, seed: int) -> None:
        super().__init__(RngStreams(seed))
        self.config = config
        self.seed = seed
        self.horizon = config.horizon
        self.constants = c = config.constants
        self.designer_chart = charts.designer_chart(c["support_wait"], c["support_duration"])
        self.supervisor_chart = charts.coordinator_chart("supervisor", c["allocation_time"])
        self.manager_chart = charts.coordinator_chart("manager", c["allocation_time"])
        for chart in (self.designer_chart, self.supervisor_chart, self.manager_chart):
            defects = validate_chart(chart)
            if defects:
                raise ValueError(f"chart {chart.name}: {', '.join(map(str, defects))}")

        self.manager_id = AgentId(Role.MANAGER)
        self._add(self.manager_id, config.manager, self.manager_chart, MANAGER_RULES)
        self.teams: list[Team] = []
        for ti, spec in enumerate(config.teams):
            sup = AgentId(Role.SUPERVISOR, ti, 0)
            self._add(sup, spec.supervisor, self.supervisor_chart, SUPERVISOR_RULES)
            members = []
            for di, stereo in enumerate(spec.designers):
                did = AgentId(Role.DESIGNER, ti, di)
                self._add(did, stereo, self.designer_chart, DESIGNER_RULES)
                members.append(did)
            self.teams.append(Team(ti, sup, members))
        self.by_name = {str(a): a for a in self.agents}

        self.contracts: dict[str, Contract] = {}
        self.backlog: list[Contract] = []
        # designer -> activity allocated to them (reserved or in hand)
        self.tasks: dict[AgentId, Activity] = {}
        self.sessions: list[SupportSession] = []
        self.pending_support: dict[AgentId, SupportSession] = {}
        self.active_rates: dict[AgentId, float] = {}
        self.segment_start: dict[AgentId, float] = {}
        self._area = 0.0
        self._area_t = 0.0
        self._contract_counter = 0
        self.samples: list[tuple[float, str, str, float]] = []
        self.initial_attributes = self._snapshot()
        self.skill_means = [
            sum(a.attributes.levels()) / len(a.attributes.levels()) for a in self.agents.values()
        ]
        self._schedule_initial()

    # ------------------------------------------------------------------ setup

    def _add(self, aid: AgentId, stereo: dict, chart, rules) -> None:
        self.agents[aid] = init_agent_from_stereotype(aid, stereo, self.streams, chart, rules)

    def _schedule_initial(self) -> None:
        q, c = self.queue, self.constants
        for spec in self.config.contracts:
            q.schedule(spec.arrival_time, "arrival", "manager", spec, ARRIVAL_PRIORITY)
        if self.config.poisson is not None:
            self._schedule_poisson(0.0)
        if c["meeting_interval"] is not None:
            for team in self.teams:
                q.schedule(c["meeting_interval"], "meeting", f"team-{team.index}", (team.index, 1), MEETING_PRIORITY)
        q.schedule(c["evolve_step"], "evolve", "system", 1, EVOLVE_PRIORITY)
        q.schedule(0.0, "sample", "system", 0, SAMPLE_PRIORITY)

    def _schedule_poisson(self, now: float) -> None:
        assert self.config.poisson is not None
        gap = -math.log1p(-self.streams.uniform01("arrivals")) / self.config.poisson.rate
        t = now + gap
        if t <= self.horizon:
            self.queue.schedule(t, "arrival", "manager", None, ARRIVAL_PRIORITY)

    # ---------------------------------------------------------------- queries

    def agent(self, aid: AgentId) -> Agent:
        return self.agents[aid]

    def team_agents(self, team_index: int) -> list[Agent]:
        return [self.agents[d] for d in self.teams[team_index].designers]

    def knows_enough(self, designer: Agent, activity: Activity) -> bool:
        return designer.attributes.knowledge[activity.category] >= activity.required_knowledge

    def is_available(self, designer: Agent) -> bool:
        return (
            designer.chart.is_idle
            and designer.chart.suspended is None
            and designer.id not in self.tasks
            and designer.id not in self.pending_support
        )

    def available_designers(self, team: Team) -> list[Agent]:
        return [a for a in self.team_agents(team.index) if self.is_available(a)]

    def session_for(self, designer: AgentId, activity: Activity) -> Optional[SupportSession]:
        for s in self.sessions:
            if s.active and s.requester == designer and s.activity_id == activity.id:
                return s
        return None

    def rate_for(self, designer: Agent, activity: Activity, supported: bool = False) -> float:
        c = self.constants
        return effective_rate(
            designer,
            activity,
            self.team_agents(designer.id.team),
            supported=supported,
            g_supported=c["g_supported"],
            g_unsupported=c["g_unsupported"],
        )

    def status_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in ContractStatus}
        for contract in self.contracts.values():
            counts[contract.status.value] += 1
        return counts

    # ------------------------------------------------------- department ops

    def assign_contract_to_team(self, contract: Contract) -> int:
        """Give ``contract`` to the least-loaded team and notify its supervisor."""
        index = pick_team([t.load() for t in self.teams])
        team = self.teams[index]
        contract.team = index
        contract.set_status(ContractStatus.IN_PROGRESS)
        team.contracts.append(contract)
        team.queue.extend(contract.activities)
        self.route_message(Message(self.manager_id, team.supervisor, "ContractAssigned", contract.id, self.now))
        return index

    def allocate_activity(self, team: Team, activity: Activity) -> Optional[AgentId]:
        """Hand ``activity`` to the best idle designer, else leave it queued."""
        rates = {a.id: self.rate_for(a, activity) for a in self.available_designers(team)}
        chosen = pick_designer(rates)
        if chosen is None:
            if activity not in team.queue:
                team.queue.append(activity)
            return None
        if activity in team.queue:
            team.queue.remove(activity)
        activity.assignee = chosen
        self.tasks[chosen] = activity
        self.route_message(Message(team.supervisor, chosen, "TaskAssigned", activity.id, self.now))
        return chosen

    # --------------------------------------------------------------- events

    def handle(self, event: Event) -> None:
        kind = event.kind
        if kind == "timeout":
            agent = self.agents[self.by_name[event.target]]
            if event.payload != agent.epoch:
                return
            self.deliver(agent, Stimulus(StimulusKind.TIMEOUT, f"timeout:{agent.state}"))
        elif kind.startswith("msg:"):
            msg: Message = event.payload
            stim = Stimulus(StimulusKind.MESSAGE, msg.kind, msg.payload, msg.sender)
            self.deliver(self.agents[msg.to], stim)
        elif kind == "replay":
            self.deliver(self.agents[self.by_name[event.target]], event.payload)
        elif kind == "arrival":
            self._arrival(event.payload)
        elif kind == "meeting":
            self._meeting(*event.payload)
        elif kind == "evolve":
            self._evolve(event.payload)
        elif kind == "sample":
            self._sample(event.payload)
        else:
            log.warning("unknown event kind %s", kind)

    def deliver(self, agent: Agent, stim: Stimulus) -> None:
        for action in react(agent, stim, self):
            if isinstance(action, FireTrigger):
                if self._fire(agent, action) is Deferred:
                    agent.deferred.append(stim)
                    return
            elif isinstance(action, SendMessage):
                self._send(agent, action)
            elif isinstance(action, ScheduleEvent):
                self.queue.schedule(self.now + action.delay, action.kind, str(agent.id), action.payload)
            elif isinstance(action, UpdateAttribute):
                apply_attribute_update(agent, action)
            else:
                raise TypeError(f"unknown action {action!r}")

    def _send(self, agent: Agent, action: SendMessage) -> None:
        session = action.payload if isinstance(action.payload, SupportSession) else None
        if action.kind == "SupportRequest":
            self.pending_support[action.to] = session
        elif action.kind == "SupportDeclined":
            self.pending_support.pop(agent.id, None)
        self.route_message(Message(agent.id, action.to, action.kind, action.payload, self.now))

    def _arrival(self, spec) -> None:
        if spec is None:
            contract = self._generate_contract()
            self._schedule_poisson(self.now)
        else:
            contract = Contract(
                spec.id,
                spec.arrival_time,
                spec.deadline,
                spec.teamwork,
                [
                    Activity(f"{spec.id}.{a.id}", spec.id, a.category, a.effort, a.required_knowledge, spec.teamwork)
                    for a in spec.activities
                ],
            )
        self.contracts[contract.id] = contract
        self.backlog.append(contract)
        self.deliver(self.agents[self.manager_id], Stimulus(StimulusKind.SCHEDULED, "contract_arrived", contract.id))

    def _generate_contract(self) -> Contract:
        poisson = self.config.poisson
        assert poisson is not None
        draw: Callable[[Distribution], float] = lambda d: self.streams.draw("arrivals", d)
        u = self.streams.uniform01("arrivals") * sum(t.weight for t in poisson.templates)
        tpl = poisson.templates[-1]
        acc = 0.0
        for cand in poisson.templates:
            acc += cand.weight
            if u < acc:
                tpl = cand
                break
        cid = f"p{self._contract_counter}"
        self._contract_counter += 1
        teamwork = min(1.0, max(0.0, draw(tpl.teamwork)))
        deadline = self.now + max(MIN_DRAW, draw(tpl.deadline_after))
        acts = []
        for j, at in enumerate(tpl.activities):
            effort = max(MIN_DRAW, draw(at.effort))
            theta = min(1.0, max(0.0, draw(at.required_knowledge)))
            acts.append(Activity(f"{cid}.a{j}", cid, at.category, effort, theta, teamwork))
        return Contract(cid, self.now, deadline, teamwork, acts)

    def _meeting(self, team_index: int, number: int) -> None:
        c = self.constants
        team = self.teams[team_index]
        end = self.now + c["meeting_duration"]
        for aid in [team.supervisor, *team.designers]:
            self.deliver(self.agents[aid], Stimulus(StimulusKind.SCHEDULED, "meeting", end))
        nxt = (number + 1) * c["meeting_interval"]
        if nxt <= self.horizon:
            self.queue.schedule(nxt, "meeting", f"team-{team_index}", (team_index, number + 1), MEETING_PRIORITY)

    def _evolve(self, number: int) -> None:
        c = self.constants
        step = c["evolve_step"]
        for team in self.teams:
            designers = self.team_agents(team.index)
            context = {}
            categories = {}
            for d in designers:
                if d.state == WORKING:
                    context[d.id] = "working"
                    categories[d.id] = self.tasks[d.id].category
                elif d.state == MEETING:
                    context[d.id] = "meeting"
            evolve_attributes(
                designers,
                step,
                context,
                eta_m=c["eta_m"],
                eta_p=c["eta_p"],
                kappa_meet=c["kappa_meet"],
                active_category=categories,
            )
        nxt = (number + 1) * step
        if nxt <= self.horizon:
            self.queue.schedule(nxt, "evolve", "system", number + 1, EVOLVE_PRIORITY)

    def _sample(self, number: int) -> None:
        for aid in sorted(self.agents):
            for name, value in self.agents[aid].attributes.named_levels():
                self.samples.append((self.now, str(aid), name, value))
        nxt = (number + 1) * self.constants["sample_interval"]
        if nxt <= self.horizon:
            self.queue.schedule(nxt, "sample", "system", number + 1, SAMPLE_PRIORITY)

    # ---------------------------------------------------- state transitions

    def _guard(self, agent: Agent, name: str) -> bool:
        task = self.tasks.get(agent.id)
        if name == "knows_enough":
            return task is not None and self.knows_enough(agent, task)
        if name == "lacks_knowledge":
            return task is not None and not self.knows_enough(agent, task)
        raise KeyError(f"unknown guard {name!r}")

    def _fire(self, agent: Agent, action: FireTrigger):
        inst = agent.chart
        trigger = inst.chart.lookup(action.name, inst.current)
        previous = inst.current
        remaining = self._work_left(agent) if previous == WORKING else None
        outcome = fire_trigger(
            inst, trigger, self.now, guards=lambda g: self._guard(agent, g), remaining=remaining
        )
        if isinstance(outcome, Moved):
            self._on_exit(agent, previous, completed=trigger.kind is TriggerKind.TIMEOUT)
            self._on_enter(agent, outcome.to, duration=action.duration)
        elif isinstance(outcome, Interrupted):
            self._on_exit(agent, previous, completed=False)
            self._on_enter(agent, outcome.to, duration=action.duration)
        return outcome

    def _work_left(self, agent: Agent) -> float:
        task = self.tasks[agent.id]
        elapsed = self.now - self.segment_start[agent.id]
        return apply_work_progress(task.remaining, self.active_rates[agent.id], elapsed)

    def _advance_area(self) -> None:
        self._area += sum(self.active_rates.values()) * (self.now - self._area_t)
        self._area_t = self.now

    def _schedule_timeout(self, agent: Agent, delay: float) -> None:
        self.queue.schedule(self.now + delay, "timeout", str(agent.id), agent.epoch, TIMEOUT_PRIORITY)

    def _on_exit(self, agent: Agent, state: str, completed: bool) -> None:
        if state == WORKING:
            self._stop_segment(agent, completed)
        elif state == SUPPORTING and completed:
            self._end_session(agent)
        elif state == ALLOCATING and completed:
            if agent.id.role is Role.MANAGER:
                while self.backlog:
                    self.assign_contract_to_team(self.backlog.pop(0))
            else:
                team = self.teams[agent.id.team]
                for activity in list(team.queue):
                    if self.allocate_activity(team, activity) is None:
                        break

    def _stop_segment(self, agent: Agent, completed: bool) -> None:
        task = self.tasks[agent.id]
        self._advance_area()
        rate = self.active_rates.pop(agent.id)
        elapsed = self.now - self.segment_start.pop(agent.id)
        task.segments.append((rate, elapsed))
        if not completed:
            task.remaining = apply_work_progress(task.remaining, rate, elapsed)
            return
        task.remaining = 0.0
        task.completed_at = self.now
        del self.tasks[agent.id]
        contract = self.contracts[task.contract_id]
        if all(a.done for a in contract.activities):
            contract.completed_at = self.now
            contract.set_status(ContractStatus.COMPLETED)
            sup = self.teams[contract.team].supervisor
            self.route_message(Message(sup, self.manager_id, "ContractCompleted", contract.id, self.now))

    def _start_segment(self, agent: Agent) -> None:
        task = self.tasks[agent.id]
        rate = self.rate_for(agent, task, supported=self.session_for(agent.id, task) is not None)
        self._advance_area()
        self.active_rates[agent.id] = rate
        self.segment_start[agent.id] = self.now
        if rate > 0:
            self._schedule_timeout(agent, task.remaining / rate)

    def _end_session(self, supporter: Agent) -> None:
        for session in self.sessions:
            if session.active and session.supporter == supporter.id:
                break
        else:
            return
        session.active = False
        session.ended = True
        requester = self.agents[session.requester]
        cat = self.contracts[self.activity_contract(session.activity_id)].activities
        category = next(a.category for a in cat if a.id == session.activity_id)
        k = requester.attributes.knowledge[category]
        requester.attributes.knowledge[category] = transfer_knowledge(
            k, supporter.attributes.knowledge[category], self.constants["eta_k"]
        )
        task = self.tasks.get(requester.id)
        if requester.state == WORKING and task is not None and task.id == session.activity_id:
            # help is over: the rate is re-evaluated from here on
            self._stop_segment(requester, completed=False)
            requester.epoch += 1
            self._start_segment(requester)

    def activity_contract(self, activity_id: str) -> str:
        return activity_id.rsplit(".", 1)[0]

    def _on_enter(self, agent: Agent, state: str, duration: Optional[float] = None) -> None:
        agent.epoch += 1
        inst = agent.chart
        spec = inst.chart.state(state).duration
        if state == IDLE:
            resumed = resume_suspended(inst, self.now)
            if isinstance(resumed, Moved):
                self._on_enter(agent, resumed.to)
                return
            if agent.id.role is Role.DESIGNER and agent.id not in self.tasks:
                sup = self.teams[agent.id.team].supervisor
                self.route_message(Message(agent.id, sup, "Available", None, self.now))
        elif state == WORKING:
            self._start_segment(agent)
        elif state == SUPPORTING:
            session = self.pending_support.pop(agent.id)
            session.active = True
            session.starts = self.now
            self.sessions.append(session)
            self._schedule_timeout(agent, session.duration)
        elif inst.remaining is not None:
            self._schedule_timeout(agent, inst.remaining)
        elif spec is COMPUTED:
            if duration is None:
                raise ValueError(f"{agent.id}: state {state} needs a computed duration")
            self._schedule_timeout(agent, duration)
        elif isinstance(spec, (int, float)):
            self._schedule_timeout(agent, float(spec))
        elif spec is not None:
            self._schedule_timeout(agent, max(0.0, self.streams.draw(f"durations:{agent.id}", spec)))
        self._replay_deferred(agent)

    def _replay_deferred(self, agent: Agent) -> None:
        pending, agent.deferred = agent.deferred, []
        for stim in pending:
            self.queue.schedule(self.now, "replay", str(agent.id), stim, REPLAY_PRIORITY)

    # -------------------------------------------------------------- results

    def _snapshot(self) -> dict[str, dict[str, float]]:
        return {str(aid): dict(self.agents[aid].attributes.named_levels()) for aid in sorted(self.agents)}

    def finish(self, horizon: float) -> RunTrace:
        self._area += sum(self.active_rates.values()) * (horizon - self._area_t)
        self._area_t = horizon
        for contract in self.contracts.values():
            if contract.status is ContractStatus.IN_PROGRESS and contract.deadline <= horizon:
                contract.set_status(ContractStatus.FAILED)
        c = self.constants
        trace = RunTrace(
            horizon=horizon,
            designer_count=sum(len(t.designers) for t in self.teams),
            productivity_area=self._area,
            total_cost=accrue_cost(self.skill_means, horizon, c["cost_base"], c["cost_skill"]),
            initial_attributes=self.initial_attributes,
            final_attributes=self._snapshot(),
            final_states={str(aid): self.agents[aid].state for aid in sorted(self.agents)},
            samples=self.samples,
        )
        for contract in self.contracts.values():
            trace.contracts.append(
                ContractRecord(
                    contract.id,
                    contract.arrival_time,
                    contract.deadline,
                    contract.effort,
                    contract.status.value,
                    contract.completed_at,
                )
            )
            for a in contract.activities:
                trace.activities.append(ActivityRecord(a.id, contract.id, a.effort, a.completed_at, list(a.segments)))
        for s in self.sessions:
            trace.sessions.append(
                SessionRecord(
                    str(s.requester),
                    str(s.supporter),
                    s.activity_id,
                    s.starts,
                    s.duration,
                    s.supporter_knowledge,
                    s.required_knowledge,
                )
            )
        return trace


def simulate(
    config: ScenarioConfig,
    seed: int,
    *,
    horizon: Optional[float] = None,
    record_events: bool = False,
    observer: Optional[Callable[[Simulation, Event], None]] = None,
) -> tuple[RunTrace, dict[str, float]]:
    """Build and run one replication; return its trace and summary metrics."""
    if horizon is not None and horizon != config.horizon:
        config = config.with_horizon(horizon)
    model = DepartmentModel(config, seed)
    events: Optional[list[str]] = [] if record_events else None
    trace = run_model(model, config.horizon, event_log=events, observer=observer)
    trace.events = events
    return trace, collect_metrics(trace)
