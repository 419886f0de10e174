from __future__ import annotations

import copy

import pytest
from hypothesis import given
from hypothesis import strategies as st

from orgsim.agent import (
    Agent,
    AgentId,
    Attributes,
    BadStereotype,
    FireTrigger,
    Role,
    Stimulus,
    StimulusKind,
    UpdateAttribute,
    apply_attribute_update,
    init_agent_from_stereotype,
    react,
)
from orgsim.design_dept.charts import designer_chart
from orgsim.rng import RngStreams

from conftest import stereotype

CHART = designer_chart(1.0, 2.0)
D = AgentId(Role.DESIGNER, 0, 0)


class TestAgentId:
    def test_manager_has_no_team(self):
        with pytest.raises(ValueError):
            AgentId(Role.MANAGER, 0)

    def test_others_need_a_team(self):
        with pytest.raises(ValueError):
            AgentId(Role.DESIGNER)

    def test_names_and_order(self):
        ids = [AgentId(Role.DESIGNER, 1, 0), AgentId(Role.DESIGNER, 0, 2), AgentId(Role.SUPERVISOR, 0), AgentId(Role.MANAGER)]
        assert [str(i) for i in sorted(ids)] == ["manager", "supervisor-0", "designer-0-2", "designer-1-0"]


class TestInit:
    def test_constants_copied_exactly(self):
        st_ = stereotype({"planning": 0.2, "design": 0.9, "testing": 0.4}, 0.1, 0.7, support=0.3)
        agent = init_agent_from_stereotype(D, st_, RngStreams(1), CHART)
        assert agent.attributes.knowledge["design"] == 0.9
        assert agent.attributes.communication == 0.1
        assert agent.attributes.productivity == 0.7
        assert agent.traits.willingness_to_support == 0.3
        assert agent.state == "Idle" and agent.chart.entered_at == 0.0

    def test_single_knowledge_number_applies_everywhere(self):
        agent = init_agent_from_stereotype(D, stereotype(0.6), RngStreams(1), CHART)
        assert set(agent.attributes.knowledge.values()) == {0.6}

    def test_distribution_sampled_in_range_and_reproducible(self):
        st_ = stereotype(communication={"dist": "uniform", "a": 0.4, "b": 0.6})
        a = init_agent_from_stereotype(D, st_, RngStreams(5), CHART)
        b = init_agent_from_stereotype(D, st_, RngStreams(5), CHART)
        assert 0.4 <= a.attributes.communication <= 0.6
        assert a.attributes.communication == b.attributes.communication

    def test_sampled_values_are_clamped(self):
        st_ = stereotype(productivity={"dist": "uniform", "a": 1.0, "b": 3.0})
        agent = init_agent_from_stereotype(D, st_, RngStreams(5), CHART)
        assert agent.attributes.productivity == 1.0

    def test_draws_come_from_the_agent_init_stream(self):
        streams = RngStreams(9)
        init_agent_from_stereotype(D, stereotype(), streams, CHART)
        assert streams.names() == ["init:designer-0-0"]

    def test_missing_trait(self):
        st_ = stereotype()
        del st_["traits"]["willingness_to_support"]
        with pytest.raises(BadStereotype, match="willingness_to_support"):
            init_agent_from_stereotype(D, st_, RngStreams(1), CHART)

    @pytest.mark.parametrize("field", ["knowledge", "communication", "productivity", "traits"])
    def test_missing_field(self, field):
        st_ = stereotype()
        del st_[field]
        with pytest.raises(BadStereotype):
            init_agent_from_stereotype(D, st_, RngStreams(1), CHART)

    def test_out_of_range_constant(self):
        with pytest.raises(BadStereotype):
            init_agent_from_stereotype(D, stereotype(communication=1.5), RngStreams(1), CHART)

    def test_bad_distribution(self):
        with pytest.raises(BadStereotype):
            init_agent_from_stereotype(D, stereotype(communication={"dist": "uniform", "a": 1, "b": 0}), RngStreams(1), CHART)


def _agent(rules=None) -> Agent:
    return init_agent_from_stereotype(D, stereotype(), RngStreams(1), CHART, rules)


class TestReact:
    def test_unknown_stimulus_is_a_logged_no_op(self, caplog):
        caplog.set_level("DEBUG")
        assert react(_agent(), Stimulus(StimulusKind.MESSAGE, "Gibberish"), None) == []
        assert "Gibberish" in caplog.text

    def test_rule_table_dispatch(self):
        agent = _agent({"Ping": lambda a, s, ctx: [FireTrigger("start_work")]})
        assert react(agent, Stimulus(StimulusKind.MESSAGE, "Ping"), None) == [FireTrigger("start_work")]

    def test_purity_on_cloned_state(self):
        def rule(agent, stim, ctx):
            u = ctx.uniform01(f"decisions:{agent.id}")
            return [UpdateAttribute("communication", agent.attributes.communication + u)]

        agent = _agent({"Talk": rule})
        clone = copy.deepcopy(agent)
        stim = Stimulus(StimulusKind.MESSAGE, "Talk")
        assert react(agent, stim, RngStreams(3)) == react(clone, stim, RngStreams(3))


LEVELS = ["knowledge.planning", "knowledge.design", "knowledge.testing", "communication", "productivity"]


class TestClamping:
    @given(st.lists(st.tuples(st.sampled_from(LEVELS), st.floats(-1e9, 1e9, allow_nan=False)), max_size=30))
    def test_levels_stay_in_unit_interval(self, updates):
        agent = _agent()
        for name, delta in updates:
            apply_attribute_update(agent, UpdateAttribute(name, agent.attributes.get(name) + delta))
            assert all(0.0 <= v <= 1.0 for v in agent.attributes.levels())

    def test_unknown_attribute(self):
        with pytest.raises(KeyError):
            apply_attribute_update(_agent(), UpdateAttribute("charisma", 0.5))

    def test_attributes_clamp(self):
        attrs = Attributes({"planning": 2.0, "design": -1.0, "testing": 0.5}, 1.5, -0.2)
        attrs.clamp()
        assert attrs.levels() == [1.0, 0.0, 0.5, 1.0, 0.0]
