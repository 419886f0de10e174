"""State charts of the department's roles.

Designer chart:

    Idle --task (knows enough)--> Working --done--> Idle
    Idle --task (lacks knowledge)--> SeekingSupport --resolved/timeout--> Working
    Idle --support accepted--> ProvidingSupport --done--> Idle
    Idle/Working/SeekingSupport --meeting (scheduled)--> InMeeting --over--> Idle

Priorities: Idle 0, Working 1, SeekingSupport 1, ProvidingSupport 2,
InMeeting 3.  Working and SeekingSupport can be interrupted; support and
meetings cannot.
"""

from __future__ import annotations

from ..statechart import COMPUTED, StateChartDef, StateDef, TriggerDef, TriggerKind

IDLE = "Idle"
WORKING = "Working"
SEEKING = "SeekingSupport"
SUPPORTING = "ProvidingSupport"
MEETING = "InMeeting"
ALLOCATING = "Allocating"

PRIORITY = {IDLE: 0, WORKING: 1, SEEKING: 1, SUPPORTING: 2, MEETING: 3, ALLOCATING: 1}

_S, _M, _T = TriggerKind.SCHEDULED, TriggerKind.MESSAGE, TriggerKind.TIMEOUT


def designer_chart(support_wait: float, support_duration: float) -> StateChartDef:
    return StateChartDef(
        name="designer",
        idle_id=IDLE,
        states=(
            StateDef(IDLE, 0, True, None),
            StateDef(WORKING, PRIORITY[WORKING], True, COMPUTED),
            StateDef(SEEKING, PRIORITY[SEEKING], True, float(support_wait)),
            StateDef(SUPPORTING, PRIORITY[SUPPORTING], False, float(support_duration)),
            StateDef(MEETING, PRIORITY[MEETING], False, COMPUTED),
        ),
        triggers=(
            TriggerDef("start_work", _M, IDLE, WORKING, guard="knows_enough"),
            TriggerDef("seek_support", _M, IDLE, SEEKING, guard="lacks_knowledge"),
            TriggerDef("support_resolved", _M, SEEKING, WORKING),
            TriggerDef("support_timeout", _T, SEEKING, WORKING),
            TriggerDef("work_done", _T, WORKING, IDLE),
            TriggerDef("give_support", _M, IDLE, SUPPORTING),
            TriggerDef("support_done", _T, SUPPORTING, IDLE),
            TriggerDef("meeting", _S, IDLE, MEETING),
            TriggerDef("meeting", _S, WORKING, MEETING),
            TriggerDef("meeting", _S, SEEKING, MEETING),
            TriggerDef("meeting_over", _T, MEETING, IDLE),
        ),
    )


def coordinator_chart(name: str, allocation_time: float) -> StateChartDef:
    """Chart shared by the manager and supervisors: they allocate and meet."""
    return StateChartDef(
        name=name,
        idle_id=IDLE,
        states=(
            StateDef(IDLE, 0, True, None),
            StateDef(ALLOCATING, PRIORITY[ALLOCATING], True, float(allocation_time)),
            StateDef(MEETING, PRIORITY[MEETING], False, COMPUTED),
        ),
        triggers=(
            TriggerDef("allocate", _M, IDLE, ALLOCATING),
            TriggerDef("allocation_done", _T, ALLOCATING, IDLE),
            TriggerDef("meeting", _S, IDLE, MEETING),
            TriggerDef("meeting", _S, ALLOCATING, MEETING),
            TriggerDef("meeting_over", _T, MEETING, IDLE),
        ),
    )
