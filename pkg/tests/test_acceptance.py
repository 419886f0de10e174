"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

from __future__ import annotations

import json
import math
import random
import statistics
import time

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from orgsim.cli import execute_command
from orgsim.config import parse_scenario_dict
from orgsim.design_dept import DepartmentModel, simulate
from orgsim.engine import Event, EventQueue, run_model
from orgsim.experiment import ReplicationPlan, compare_paired, summarize
from orgsim.rng import Exponential, RngStreams, draw_sample
from orgsim.statechart import DefectKind, StateChartDef, StateDef, TriggerDef, TriggerKind, validate_chart
from orgsim.calibration import make_evaluator

from conftest import SCENARIOS, contract, load_scenario, scenario, stereotype

M, T = TriggerKind.MESSAGE, TriggerKind.TIMEOUT


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
        assert ok, detail

    return emit


def test_01_determinism(tmp_path, report):
    outs = [tmp_path / "first", tmp_path / "second"]
    for out in outs:
        argv = ["run", "--config", str(SCENARIOS / "department.json"), "--seed", "42", "--events-log", "--out", str(out)]
        assert execute_command(argv) == 0
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in ("run_summary.csv", "events.log"))
    lines = len((outs[0] / "events.log").read_text().splitlines())
    report(1, "determinism", same, f"run_summary.csv and events.log identical ({lines} events)")


def test_02_event_queue_oracle(report):
    rng = random.Random(2)
    specs = [(float(rng.randrange(200)), rng.randrange(-2, 4)) for _ in range(10_000)]
    start = time.perf_counter()
    q = EventQueue()
    for i, (t, p) in enumerate(specs):
        q.push(Event(t, "e", str(i), priority=p))
    popped = [int(q.pop().target) for _ in specs]
    elapsed = time.perf_counter() - start
    oracle = sorted(range(len(specs)), key=lambda i: (specs[i][0], -specs[i][1]))
    ok = popped == oracle and elapsed < 1.0
    report(2, "event-queue oracle", ok, f"10^4 events match stable sort, {elapsed:.3f}s")


@pytest.fixture(scope="module")
def project_a():
    base = load_scenario("project_a.json")
    variant = load_scenario("project_a_plus_communicator.json")
    return compare_paired(base, variant, ReplicationPlan(30, 7))


def test_03_added_communicator(project_a, report):
    s = project_a.stats["mean_team_productivity"]
    newcomer = [r.outputs["final.designer-0-3.communication"] for r in project_a.records_b]
    incumbents = [
        statistics.fmean(r.outputs[f"final.designer-0-{i}.communication"] for i in range(3)) for r in project_a.records_b
    ]
    a = s.ci_low > 0
    b = all(c < 0.9 for c in newcomer)
    c = all(m > 0.1 for m in incumbents)
    detail = (
        f"(a) productivity diff {s.mean:.4f} CI [{s.ci_low:.4f}, {s.ci_high:.4f}]; "
        f"(b) newcomer max final comm {max(newcomer):.3f} < 0.9; "
        f"(c) incumbent min mean comm {min(incumbents):.3f} > 0.1"
    )
    report(3, "added communicator", a and b and c, detail)


def test_04_teamwork_sensitivity(report):
    low = load_scenario("teamwork_low.json")
    high = load_scenario("teamwork_high.json")
    # B - A with A = tau 0.9 and B = tau 0.1
    s = compare_paired(high, low, ReplicationPlan(30, 11)).stats["on_time_fraction"]
    report(4, "teamwork sensitivity", s.ci_low > 0, f"on-time diff {s.mean:.3f} CI [{s.ci_low:.3f}, {s.ci_high:.3f}]")


def test_05_homogeneous_fixed_point(report):
    twin = stereotype(0.8, 0.4, 0.6)
    doc = scenario(
        designers=["twin"] * 3,
        horizon=500,
        stereotypes={"twin": twin},
        contracts=[contract(f"c{i}", 40.0 * i, 40.0 * i + 30, ("design", 5.0, 0.5)) for i in range(10)],
        constants={"meeting_interval": 24},
    )
    trace, metrics = simulate(parse_scenario_dict(doc), 3)
    comm = [v for _, agent, attr, v in trace.samples if attr == "communication" and agent.startswith("designer")]
    ok = not trace.sessions and metrics["contracts_completed"] == 10 and set(comm) == {0.4}
    report(5, "homogeneous fixed point", ok, f"{len(comm)} samples all exactly 0.4, no support sessions")


level = st.floats(0, 1)


@st.composite
def valid_configs(draw):
    people = {
        name: stereotype(draw(level), draw(level), draw(level), support=draw(level), communicate=draw(level), base=draw(level))
        for name in ("a", "b")
    }
    teams = [
        {"designers": draw(st.lists(st.sampled_from(["a", "b"]), min_size=1, max_size=3))}
        for _ in range(draw(st.integers(1, 3)))
    ]
    if draw(st.booleans()):
        contracts = {
            "poisson": {
                "rate": draw(st.floats(0.01, 0.5)),
                "templates": [
                    {
                        "teamwork": draw(level),
                        "deadline_after": draw(st.floats(1, 80)),
                        "activities": [
                            {"category": "design", "effort": {"dist": "exponential", "mean": draw(st.floats(0.5, 8))}, "required_knowledge": draw(level)}
                        ],
                    }
                ],
            }
        }
    else:
        acts = st.tuples(st.sampled_from(["planning", "design", "testing"]), st.floats(0.1, 10), level)
        contracts = [
            contract(f"c{i}", draw(st.floats(0, 150)), 150 + draw(st.floats(0, 50)), *draw(st.lists(acts, min_size=1, max_size=3)), teamwork=draw(level))
            for i in range(draw(st.integers(0, 6)))
        ]
    return scenario(
        designers=None,
        contracts=contracts,
        horizon=draw(st.floats(0, 200)),
        stereotypes=people,
        department={"teams": teams},
        constants={"meeting_interval": draw(st.one_of(st.none(), st.floats(5, 60))), "eta_m": draw(level)},
    )


class TestContractConservation:
    checked_events = 0
    configs = 0

    @given(valid_configs(), st.integers(0, 2**32))
    @settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_every_event(self, doc, seed):
        cfg = parse_scenario_dict(doc)
        model = DepartmentModel(cfg, seed)
        arrivals = 0

        def check(m, event):
            nonlocal arrivals
            arrivals += event.kind == "arrival"
            counts = m.status_counts()
            assert arrivals == sum(counts.values())
            assert min(counts.values()) >= 0
            type(self).checked_events += 1

        trace = run_model(model, cfg.horizon, observer=check)
        counts = {}
        for c in trace.contracts:
            counts[c.status] = counts.get(c.status, 0) + 1
        assert sum(counts.values()) == arrivals
        type(self).configs += 1

    def test_zz_report(self, report):
        ok = self.configs >= 100
        report(6, "contract conservation", ok, f"{self.configs} random configs, {self.checked_events} events checked")


def test_07_work_conservation(project_a, report):
    worst = 0.0
    count = 0
    for rec in project_a.records_a + project_a.records_b:
        for act in rec.trace.activities:
            if act.completed_at is None:
                continue
            done = math.fsum(r * e for r, e in act.segments)
            worst = max(worst, abs(done - act.effort) / act.effort)
            count += 1
    report(7, "work conservation", count > 0 and worst <= 1e-9, f"{count} activities, worst relative error {worst:.2e}")


def test_08_statistics(report):
    s = summarize([0.0, 2.0])
    closed = (1.0 - 12.706204736174707, 1.0 + 12.706204736174707)
    quantile_ok = abs(s.ci_low - -11.706) <= 1e-3 and abs(s.ci_high - 13.706) <= 1e-3
    half = math.tan(math.pi * (0.975 - 0.5)) * math.sqrt(2.0) / math.sqrt(2.0)
    closed_ok = abs(s.ci_low - (1.0 - half)) <= 1e-12 and abs(s.ci_high - (1.0 + half)) <= 1e-12
    rng = random.Random(8)
    xs = [rng.gauss(5.0, 2.0) for _ in range(400)]
    ratio = summarize(xs).half_width / summarize(xs[:100]).half_width
    ok = quantile_ok and closed_ok and 0.425 <= ratio <= 0.575 and abs(closed[0] - s.ci_low) < 1e-3
    report(8, "statistics", ok, f"CI [{s.ci_low:.4f}, {s.ci_high:.4f}], width ratio {ratio:.3f}")


def test_09_exponential_sampler(report):
    streams = RngStreams(9)
    mean = math.fsum(draw_sample(streams, "effort", Exponential(2.0)) for _ in range(100_000)) / 100_000
    report(9, "sampler", 1.96 <= mean <= 2.04, f"exponential(2) mean of 10^5 draws {mean:.4f}")


def test_10_calibration_self_recovery(tmp_path, report):
    cfg = load_scenario("calibration_pair.json")
    metric = "final.designer-0-0.communication"
    truth = make_evaluator(cfg, 3, 2024)({"constants.eta_m": 0.2})[metric]
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({
        "targets": {metric: truth},
        "parameters": {"constants.eta_m": [0.0, 0.5]},
        "replications_per_eval": 3,
        "top_k": 5,
    }))
    outs = [tmp_path / "one", tmp_path / "two"]
    for out in outs:
        argv = ["calibrate", "--config", str(SCENARIOS / "calibration_pair.json"), "--targets", str(targets),
                "--budget", "500", "--seed", "1", "--out", str(out)]
        assert execute_command(argv) == 0
    text = [(out / "calibration_report.csv").read_text() for out in outs]
    rows = [line.split(",") for line in text[0].splitlines()[1:]]
    best_d, best_eta = float(rows[0][1]), float(rows[0][2])
    ranked = [float(r[1]) for r in rows] == sorted(float(r[1]) for r in rows)
    ok = text[0] == text[1] and len(rows) == 5 and ranked and best_d <= 0.05
    report(10, "calibration self-recovery", ok, f"best eta_m {best_eta:.4f} discrepancy {best_d:.2e}, top-5 identical on rerun")


def _chart(states, idle, triggers) -> StateChartDef:
    return StateChartDef("crafted", tuple(states), idle, tuple(triggers))


def test_11_validation(report):
    idle, work = StateDef("Idle", 0, True, None), StateDef("Working", 1, True, 2.0)
    base = [TriggerDef("go", M, "Idle", "Working"), TriggerDef("done", T, "Working", "Idle")]
    cases = {
        "missing idle": (_chart([idle, work], None, base), [DefectKind.MISSING_IDLE]),
        "unreachable": (
            _chart([idle, work, StateDef("Orphan", 1, True, 1.0)], "Idle", base + [TriggerDef("back", T, "Orphan", "Idle")]),
            [DefectKind.UNREACHABLE_STATE],
        ),
        "no return": (
            _chart([idle, work, StateDef("Trap", 1, True, None)], "Idle", base + [TriggerDef("fall", M, "Idle", "Trap")]),
            [DefectKind.NO_RETURN_TO_IDLE],
        ),
    }
    got = {name: [d.kind for d in validate_chart(chart)] for name, (chart, _) in cases.items()}
    ok = all(got[name] == want for name, (_, want) in cases.items())
    report(11, "validation", ok, ", ".join(f"{n} -> {[k.value for k in got[n]]}" for n in cases))
