from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

import pytest

from orgsim.config import parse_scenario_dict

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def traits(support: float = 0.5, communicate: float = 0.5, base: float = 0.5) -> dict[str, float]:
    return {
        "willingness_to_support": support,
        "willingness_to_communicate": communicate,
        "base_productivity": base,
    }


def stereotype(knowledge: Any = 0.5, communication: Any = 0.5, productivity: Any = 0.5, **tr: float) -> dict:
    return {
        "knowledge": knowledge,
        "communication": communication,
        "productivity": productivity,
        "traits": traits(**tr),
    }


def contract(cid: str, arrival: float, deadline: float, *acts: tuple, teamwork: float = 0.5) -> dict:
    return {
        "id": cid,
        "arrival_time": arrival,
        "deadline": deadline,
        "teamwork": teamwork,
        "activities": [
            {"id": f"a{i}", "category": cat, "effort": effort, "required_knowledge": theta}
            for i, (cat, effort, theta) in enumerate(acts)
        ],
    }


def scenario(designers: Any = 1, contracts: Any = None, horizon: float = 100.0, **extra: Any) -> dict:
    doc: dict[str, Any] = {
        "horizon": horizon,
        "department": {"teams": [{"designers": designers}]},
    }
    if contracts is not None:
        doc["contracts"] = contracts if isinstance(contracts, dict) else {"explicit": contracts}
    doc.update(copy.deepcopy(extra))
    return doc


def load_scenario(name: str):
    return parse_scenario_dict(json.loads((SCENARIOS / name).read_text()))


@pytest.fixture
def write_json(tmp_path):
    def write(name: str, data: Any) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return write
