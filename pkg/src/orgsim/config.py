"""Scenario configuration: JSON schema, validation, defaults, write-back.

A scenario file is a JSON object::

    {
      "horizon": 1000,
      "constants": {...},                 # optional, see DEFAULT_CONSTANTS
      "stereotypes": {"name": {...}},     # optional; "default" is built in
      "department": {
        "manager": "default",
        "teams": [{"supervisor": "default",
                   "designers": ["expert", {"stereotype": "expert", "communication": 0.9}]}]
      },
      "contracts": {"explicit": [...]}    # or {"poisson": {...}}; optional
    }

Attribute levels and stochastic inputs are either numbers or distribution
objects such as ``{"dist": "uniform", "a": 0.4, "b": 0.6}``.

Parsing collects *every* defect before failing; each names the path of the
offending field.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional

from .agent import CATEGORIES, TRAIT_NAMES
from .rng import BadDistributionParams, Distribution, dist_from_json

__all__ = [
    "ConfigError",
    "ConfigSyntaxError",
    "DEFAULT_CONSTANTS",
    "ScenarioConfig",
    "SchemaError",
    "get_path",
    "load_json",
    "parse_scenario_config",
    "parse_scenario_dict",
    "set_path",
]

DEFAULT_CONSTANTS: dict[str, Any] = {
    "eta_m": 0.05,  # communication drift rate, 1/h
    "eta_p": 0.05,  # productivity drift rate, 1/h
    "eta_k": 0.3,  # knowledge transfer per support session
    "kappa_meet": 4.0,  # communication drift multiplier in meetings
    "support_duration": 2.0,  # h
    "support_wait": 1.0,  # h a requester waits for help
    "meeting_interval": 40.0,  # h between team meetings; null disables
    "meeting_duration": 1.0,  # h
    "g_supported": 0.9,
    "g_unsupported": 0.5,
    "cost_base": 10.0,  # money/h per agent
    "cost_skill": 20.0,  # money/h per unit of mean start-up skill
    "teamwork_default": 0.5,
    "allocation_time": 0.0,  # h spent in Allocating
    "evolve_step": 1.0,  # h between attribute updates
    "sample_interval": 10.0,  # h between trace samples
}

# (lower, upper, lower_open, nullable)
_CONSTANT_RANGES: dict[str, tuple[float, float, bool, bool]] = {
    "eta_m": (0.0, math.inf, False, False),
    "eta_p": (0.0, math.inf, False, False),
    "eta_k": (0.0, 1.0, False, False),
    "kappa_meet": (0.0, math.inf, False, False),
    "support_duration": (0.0, math.inf, True, False),
    "support_wait": (0.0, math.inf, True, False),
    "meeting_interval": (0.0, math.inf, True, True),
    "meeting_duration": (0.0, math.inf, True, False),
    "g_supported": (0.0, 1.0, False, False),
    "g_unsupported": (0.0, 1.0, False, False),
    "cost_base": (0.0, math.inf, False, False),
    "cost_skill": (0.0, math.inf, False, False),
    "teamwork_default": (0.0, 1.0, False, False),
    "allocation_time": (0.0, math.inf, False, False),
    "evolve_step": (0.0, math.inf, True, False),
    "sample_interval": (0.0, math.inf, True, False),
}

DEFAULT_STEREOTYPE: dict[str, Any] = {
    "knowledge": {c: 0.5 for c in CATEGORIES},
    "communication": 0.5,
    "productivity": 0.5,
    "traits": {t: 0.5 for t in TRAIT_NAMES},
}

DEFAULT_HORIZON = 1000.0


@dataclass(frozen=True)
class SchemaError:
    path: str
    reason: str

    def __str__(self) -> str:
        return f"{self.path}: {self.reason}"


class ConfigError(ValueError):
    def __init__(self, errors: list[SchemaError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


class ConfigSyntaxError(ValueError):
    def __init__(self, path: str, line: int, msg: str):
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


@dataclass
class ActivitySpec:
    id: str
    category: str
    effort: float
    required_knowledge: float


@dataclass
class ContractSpec:
    id: str
    arrival_time: float
    deadline: float
    teamwork: float
    activities: list[ActivitySpec]


@dataclass
class ActivityTemplate:
    category: str
    effort: Distribution
    required_knowledge: Distribution


@dataclass
class ContractTemplate:
    weight: float
    teamwork: Distribution
    deadline_after: Distribution
    activities: list[ActivityTemplate]


@dataclass
class PoissonArrivals:
    rate: float
    templates: list[ContractTemplate]


@dataclass
class TeamSpec:
    supervisor: dict[str, Any]
    designers: list[dict[str, Any]]


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``raw`` is the normalised JSON document."""

    horizon: float
    constants: dict[str, Any]
    manager: dict[str, Any]
    teams: list[TeamSpec]
    contracts: list[ContractSpec] = field(default_factory=list)
    poisson: Optional[PoissonArrivals] = None
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    def c(self, name: str) -> Any:
        return self.constants[name]

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self.raw)

    def with_horizon(self, horizon: float) -> "ScenarioConfig":
        data = self.to_dict()
        data["horizon"] = horizon
        return parse_scenario_dict(data)

    def with_values(self, values: Mapping[str, Any]) -> "ScenarioConfig":
        data = self.to_dict()
        for path, value in values.items():
            set_path(data, path, value)
        return parse_scenario_dict(data)


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


class _Checker:
    def __init__(self) -> None:
        self.errors: list[SchemaError] = []

    def err(self, path: str, reason: str) -> None:
        self.errors.append(SchemaError(path, reason))

    def obj(self, value: Any, path: str) -> Optional[Mapping[str, Any]]:
        if not isinstance(value, Mapping):
            self.err(path, "expected an object")
            return None
        return value

    def unknown(self, value: Mapping[str, Any], allowed: set[str], path: str) -> None:
        for key in value:
            if key not in allowed:
                self.err(f"{path}.{key}" if path else key, "unknown field")

    def number(
        self,
        value: Any,
        path: str,
        lo: float = -math.inf,
        hi: float = math.inf,
        lo_open: bool = False,
    ) -> Optional[float]:
        if not _is_number(value):
            self.err(path, "expected a finite number")
            return None
        if value < lo or value > hi or (lo_open and value == lo):
            left = "(" if lo_open else "["
            self.err(path, f"outside {left}{_fmt(lo)},{_fmt(hi)}]")
            return None
        return float(value)

    def dist(self, value: Any, path: str, lo: float = -math.inf, hi: float = math.inf) -> Optional[Distribution]:
        if _is_number(value):
            num = self.number(value, path, lo, hi)
            return None if num is None else dist_from_json(num)
        try:
            return dist_from_json(value)
        except BadDistributionParams as exc:
            self.err(path, str(exc))
            return None


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:g}"


def _check_level_block(ck: _Checker, block: Any, path: str, partial: bool) -> Optional[dict[str, Any]]:
    """Validate a stereotype (or per-designer override) block; return it normalised."""
    block = ck.obj(block, path)
    if block is None:
        return None
    allowed = {"knowledge", "communication", "productivity", "traits"}
    if partial:
        allowed.add("stereotype")
    ck.unknown(block, allowed, path)
    out: dict[str, Any] = {}
    if "knowledge" in block:
        know = block["knowledge"]
        # a distribution object applies to every category, drawn per category
        if isinstance(know, Mapping) and "dist" not in know:
            ck.unknown(know, set(CATEGORIES), f"{path}.knowledge")
            cats = [c for c in CATEGORIES if c in know]
            if not partial:
                for c in CATEGORIES:
                    if c not in know:
                        ck.err(f"{path}.knowledge.{c}", "missing")
            out["knowledge"] = {}
            for c in cats:
                if ck.dist(know[c], f"{path}.knowledge.{c}", 0.0, 1.0) is not None:
                    out["knowledge"][c] = know[c]
        else:
            if ck.dist(know, f"{path}.knowledge", 0.0, 1.0) is not None:
                out["knowledge"] = {c: know for c in CATEGORIES}
    elif not partial:
        ck.err(f"{path}.knowledge", "missing")
    for key in ("communication", "productivity"):
        if key in block:
            if ck.dist(block[key], f"{path}.{key}", 0.0, 1.0) is not None:
                out[key] = block[key]
        elif not partial:
            ck.err(f"{path}.{key}", "missing")
    if "traits" in block:
        traits = ck.obj(block["traits"], f"{path}.traits")
        if traits is not None:
            ck.unknown(traits, set(TRAIT_NAMES), f"{path}.traits")
            out["traits"] = {}
            for t in TRAIT_NAMES:
                if t in traits:
                    if ck.dist(traits[t], f"{path}.traits.{t}", 0.0, 1.0) is not None:
                        out["traits"][t] = traits[t]
                elif not partial:
                    ck.err(f"{path}.traits.{t}", "missing")
    elif not partial:
        ck.err(f"{path}.traits", "missing")
    return out


def merge_stereotype(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        if key == "stereotype":
            continue
        if isinstance(value, Mapping):
            out.setdefault(key, {})
            out[key] = {**out[key], **copy.deepcopy(dict(value))}
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_scenario_dict(data: Any) -> ScenarioConfig:
    """Validate a decoded scenario document and fill defaults.

    Raises :class:`ConfigError` listing every defect found.
    """
    ck = _Checker()
    doc = ck.obj(data, "$")
    if doc is None:
        raise ConfigError(ck.errors)
    ck.unknown(doc, {"horizon", "constants", "stereotypes", "department", "contracts"}, "")

    horizon = ck.number(doc.get("horizon", DEFAULT_HORIZON), "horizon", 0.0)

    constants = dict(DEFAULT_CONSTANTS)
    raw_constants = doc.get("constants", {})
    if ck.obj(raw_constants, "constants") is not None:
        ck.unknown(raw_constants, set(DEFAULT_CONSTANTS), "constants")
        for key, (lo, hi, lo_open, nullable) in _CONSTANT_RANGES.items():
            if key not in raw_constants:
                continue
            value = raw_constants[key]
            if value is None and nullable:
                constants[key] = None
                continue
            num = ck.number(value, f"constants.{key}", lo, hi, lo_open)
            if num is not None:
                constants[key] = value

    stereotypes: dict[str, dict[str, Any]] = {"default": copy.deepcopy(DEFAULT_STEREOTYPE)}
    raw_st = doc.get("stereotypes", {})
    if ck.obj(raw_st, "stereotypes") is not None:
        for name, block in raw_st.items():
            norm = _check_level_block(ck, block, f"stereotypes.{name}", partial=False)
            if norm is not None:
                stereotypes[name] = norm

    def resolve(ref: Any, path: str) -> tuple[Optional[dict[str, Any]], Any]:
        """Return (effective stereotype, normalised reference)."""
        if isinstance(ref, str):
            if ref not in stereotypes:
                ck.err(path, f"unknown stereotype {ref!r}")
                return None, ref
            return stereotypes[ref], ref
        if isinstance(ref, Mapping):
            name = ref.get("stereotype", "default")
            if not isinstance(name, str) or name not in stereotypes:
                ck.err(f"{path}.stereotype", f"unknown stereotype {name!r}")
                return None, ref
            over = _check_level_block(ck, ref, path, partial=True)
            if over is None:
                return None, ref
            norm_ref = {"stereotype": name, **over}
            return merge_stereotype(stereotypes[name], over), norm_ref
        ck.err(path, "expected a stereotype name or an object")
        return None, ref

    raw_dept = doc.get("department")
    manager: Optional[dict[str, Any]] = None
    teams: list[TeamSpec] = []
    norm_dept: dict[str, Any] = {"manager": "default", "teams": []}
    dept = ck.obj(raw_dept, "department") if raw_dept is not None else None
    if raw_dept is None:
        ck.err("department", "missing")
    if dept is not None:
        ck.unknown(dept, {"manager", "teams"}, "department")
        manager, norm_dept["manager"] = resolve(dept.get("manager", "default"), "department.manager")
        raw_teams = dept.get("teams")
        if not isinstance(raw_teams, list) or not raw_teams:
            ck.err("department.teams", "expected a non-empty list of teams")
            raw_teams = []
        for ti, team in enumerate(raw_teams):
            tpath = f"department.teams.{ti}"
            if ck.obj(team, tpath) is None:
                continue
            ck.unknown(team, {"supervisor", "designers"}, tpath)
            sup, sup_ref = resolve(team.get("supervisor", "default"), f"{tpath}.supervisor")
            raw_designers = team.get("designers")
            if isinstance(raw_designers, int) and not isinstance(raw_designers, bool):
                raw_designers = ["default"] * raw_designers
            if not isinstance(raw_designers, list) or not raw_designers:
                ck.err(f"{tpath}.designers", "expected at least one designer")
                raw_designers = []
            designers = []
            norm_designers = []
            for di, ref in enumerate(raw_designers):
                eff, norm_ref = resolve(ref, f"{tpath}.designers.{di}")
                designers.append(eff)
                norm_designers.append(norm_ref)
            norm_dept["teams"].append({"supervisor": sup_ref, "designers": norm_designers})
            if sup is not None and all(d is not None for d in designers):
                teams.append(TeamSpec(sup, designers))  # type: ignore[arg-type]

    contracts: list[ContractSpec] = []
    poisson: Optional[PoissonArrivals] = None
    norm_contracts: dict[str, Any] = {"explicit": []}
    raw_contracts = doc.get("contracts", {"explicit": []})
    teamwork_default = constants["teamwork_default"]
    if ck.obj(raw_contracts, "contracts") is not None:
        ck.unknown(raw_contracts, {"explicit", "poisson"}, "contracts")
        if "explicit" in raw_contracts and "poisson" in raw_contracts:
            ck.err("contracts", "give either 'explicit' or 'poisson', not both")
        elif "poisson" in raw_contracts:
            poisson, norm_contracts = _check_poisson(ck, raw_contracts["poisson"], teamwork_default)
        else:
            contracts, norm_contracts = _check_explicit(
                ck, raw_contracts.get("explicit", []), teamwork_default
            )

    if ck.errors:
        raise ConfigError(ck.errors)
    assert horizon is not None and manager is not None
    raw = {
        "horizon": horizon,
        "constants": constants,
        "stereotypes": stereotypes,
        "department": norm_dept,
        "contracts": norm_contracts,
    }
    return ScenarioConfig(
        horizon=horizon,
        constants=constants,
        manager=manager,
        teams=teams,
        contracts=contracts,
        poisson=poisson,
        raw=copy.deepcopy(raw),
    )


def _check_explicit(ck: _Checker, items: Any, teamwork_default: float) -> tuple[list[ContractSpec], dict[str, Any]]:
    if not isinstance(items, list):
        ck.err("contracts.explicit", "expected a list")
        return [], {"explicit": []}
    out: list[ContractSpec] = []
    norm: list[dict[str, Any]] = []
    seen: set[str] = set()
    for ci, item in enumerate(items):
        path = f"contracts.explicit.{ci}"
        if ck.obj(item, path) is None:
            continue
        ck.unknown(item, {"id", "arrival_time", "deadline", "teamwork", "activities"}, path)
        cid = item.get("id", f"c{ci}")
        if not isinstance(cid, str) or not cid:
            ck.err(f"{path}.id", "expected a non-empty string")
            cid = f"c{ci}"
        if cid in seen:
            ck.err(f"{path}.id", f"duplicate contract id {cid!r}")
        seen.add(cid)
        arrival = ck.number(item.get("arrival_time", 0.0), f"{path}.arrival_time", 0.0)
        deadline = ck.number(item.get("deadline"), f"{path}.deadline")
        if arrival is not None and deadline is not None and deadline <= arrival:
            ck.err(f"{path}.deadline", "must be later than arrival_time")
            deadline = None
        teamwork = ck.number(item.get("teamwork", teamwork_default), f"{path}.teamwork", 0.0, 1.0)
        acts_raw = item.get("activities")
        if not isinstance(acts_raw, list) or not acts_raw:
            ck.err(f"{path}.activities", "expected a non-empty list")
            acts_raw = []
        acts: list[ActivitySpec] = []
        norm_acts: list[dict[str, Any]] = []
        act_ids: set[str] = set()
        for ai, act in enumerate(acts_raw):
            apath = f"{path}.activities.{ai}"
            if ck.obj(act, apath) is None:
                continue
            ck.unknown(act, {"id", "category", "effort", "required_knowledge"}, apath)
            aid = act.get("id", f"a{ai}")
            if not isinstance(aid, str) or not aid or aid in act_ids:
                ck.err(f"{apath}.id", "expected a unique non-empty string")
            act_ids.add(str(aid))
            cat = act.get("category")
            if cat not in CATEGORIES:
                ck.err(f"{apath}.category", f"expected one of {list(CATEGORIES)}")
            effort = ck.number(act.get("effort"), f"{apath}.effort", 0.0, lo_open=True)
            theta = ck.number(act.get("required_knowledge"), f"{apath}.required_knowledge", 0.0, 1.0)
            if cat in CATEGORIES and effort is not None and theta is not None:
                acts.append(ActivitySpec(str(aid), cat, effort, theta))
                norm_acts.append(
                    {"id": str(aid), "category": cat, "effort": effort, "required_knowledge": theta}
                )
        if arrival is not None and deadline is not None and teamwork is not None:
            out.append(ContractSpec(cid, arrival, deadline, teamwork, acts))
            norm.append(
                {
                    "id": cid,
                    "arrival_time": arrival,
                    "deadline": deadline,
                    "teamwork": teamwork,
                    "activities": norm_acts,
                }
            )
    return out, {"explicit": norm}


def _check_poisson(ck: _Checker, block: Any, teamwork_default: float) -> tuple[Optional[PoissonArrivals], dict[str, Any]]:
    path = "contracts.poisson"
    if ck.obj(block, path) is None:
        return None, {"poisson": block}
    ck.unknown(block, {"rate", "templates"}, path)
    rate = ck.number(block.get("rate"), f"{path}.rate", 0.0, lo_open=True)
    raw_templates = block.get("templates")
    if not isinstance(raw_templates, list) or not raw_templates:
        ck.err(f"{path}.templates", "expected a non-empty list")
        raw_templates = []
    templates: list[ContractTemplate] = []
    norm_templates: list[dict[str, Any]] = []
    for ti, tpl in enumerate(raw_templates):
        tpath = f"{path}.templates.{ti}"
        if ck.obj(tpl, tpath) is None:
            continue
        ck.unknown(tpl, {"weight", "teamwork", "deadline_after", "activities"}, tpath)
        weight = ck.number(tpl.get("weight", 1.0), f"{tpath}.weight", 0.0, lo_open=True)
        tw_raw = tpl.get("teamwork", teamwork_default)
        teamwork = ck.dist(tw_raw, f"{tpath}.teamwork", 0.0, 1.0)
        if "deadline_after" not in tpl:
            ck.err(f"{tpath}.deadline_after", "missing")
        deadline_after = ck.dist(tpl.get("deadline_after", 1.0), f"{tpath}.deadline_after", 0.0)
        acts_raw = tpl.get("activities")
        if not isinstance(acts_raw, list) or not acts_raw:
            ck.err(f"{tpath}.activities", "expected a non-empty list")
            acts_raw = []
        acts: list[ActivityTemplate] = []
        norm_acts = []
        for ai, act in enumerate(acts_raw):
            apath = f"{tpath}.activities.{ai}"
            if ck.obj(act, apath) is None:
                continue
            ck.unknown(act, {"category", "effort", "required_knowledge"}, apath)
            cat = act.get("category")
            if cat not in CATEGORIES:
                ck.err(f"{apath}.category", f"expected one of {list(CATEGORIES)}")
            effort = ck.dist(act.get("effort"), f"{apath}.effort", 0.0)
            theta = ck.dist(act.get("required_knowledge"), f"{apath}.required_knowledge", 0.0, 1.0)
            if cat in CATEGORIES and effort is not None and theta is not None:
                acts.append(ActivityTemplate(cat, effort, theta))
                norm_acts.append(
                    {"category": cat, "effort": act["effort"], "required_knowledge": act["required_knowledge"]}
                )
        if weight is not None and teamwork is not None and deadline_after is not None:
            templates.append(ContractTemplate(weight, teamwork, deadline_after, acts))
            norm_templates.append(
                {
                    "weight": weight,
                    "teamwork": tw_raw,
                    "deadline_after": tpl["deadline_after"] if "deadline_after" in tpl else None,
                    "activities": norm_acts,
                }
            )
    if rate is None:
        return None, {"poisson": block}
    return PoissonArrivals(rate, templates), {"poisson": {"rate": rate, "templates": norm_templates}}


def load_json(path: str | Path) -> Any:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(str(p), exc.lineno, exc.msg) from None


def parse_scenario_config(path: str | Path) -> ScenarioConfig:
    """Read, validate and normalise a scenario file.

    Raises FileNotFoundError, :class:`ConfigSyntaxError` or :class:`ConfigError`.
    """
    return parse_scenario_dict(load_json(path))


def dump_config(config: ScenarioConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def _split(path: str) -> Iterator[str | int]:
    for part in path.split("."):
        yield int(part) if part.isdigit() else part


def get_path(data: Any, path: str) -> Any:
    node = data
    for key in _split(path):
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise KeyError(path) from None
    return node


def set_path(data: Any, path: str, value: Any) -> None:
    keys = list(_split(path))
    get_path(data, path)
    node = data
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value
