"""JSON run configuration: schema, validation and construction of model objects."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema

from .errors import ConfigError, SustainError
from .model import DemandSystem, EconomySpec, GrowthFunction, ResourceSpec, TerminalCondition
from .oracle import OracleConfig
from .solver import SolverConfig

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["economy", "resources", "demand"],
    "properties": {
        "economy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["horizon_steps"],
            "properties": {
                "horizon_steps": {"type": "integer", "minimum": 2},
                "dt": _pos,
                "interest_rate": {"oneOf": [_num, _vec]},
                "capital0": {"type": "number", "minimum": 0},
                "terminal": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["exhaust", "stock_target"]},
                        "target_stocks": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "tolerance": _pos,
                    },
                },
            },
        },
        "resources": {
            "type": "array",
            "minItems": 1,
            "maxItems": 3,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["stock0"],
                "properties": {
                    "name": {"type": "string"},
                    "stock0": _pos,
                    "growth": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": ["zero", "exponential", "logistic"]},
                            "rate": _num,
                            "capacity": _pos,
                        },
                    },
                },
            },
        },
        "demand": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "scale", "exponents"],
                    "properties": {"kind": {"const": "isoelastic"}, "scale": _vec, "exponents": _mat},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "intercepts", "slopes"],
                    "properties": {"kind": {"const": "linear"}, "intercepts": _vec, "slopes": _mat},
                },
            ]
        },
        "externality": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"impact_scale": {"type": "number", "minimum": 0}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shooting_tolerance": _pos,
                "max_outer_iterations": {"type": "integer", "minimum": 1},
                "bracket": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "inner_tolerance": _pos,
                "check_monotone": {"type": "boolean"},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "periods": {"type": "integer", "minimum": 1},
                "grid_points": {"type": "integer", "minimum": 1},
                "bounds": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                },
                "cbar_tolerance": _pos,
                "max_gap": {"type": "number", "minimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": _num},
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"figures": {"type": "boolean"}},
        },
    },
}


@dataclass
class RunConfig:
    economy: EconomySpec
    resources: list[ResourceSpec]
    demand: DemandSystem
    solver: SolverConfig
    oracle: OracleConfig | None
    sweep: dict
    figures: bool
    raw: dict


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build(doc: dict) -> RunConfig:
    """Validate a config document and construct the model objects."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        return _build(doc)
    except SustainError as exc:
        raise ConfigError(str(exc)) from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(doc):
    e = doc["economy"]
    term = e.get("terminal", {"kind": "exhaust"})
    ts = term.get("target_stocks")
    econ = EconomySpec(
        horizon_steps=e["horizon_steps"],
        dt=float(e.get("dt", 1.0)),
        interest_rate=e.get("interest_rate", 0.0),
        capital0=float(e.get("capital0", 0.0)),
        terminal=TerminalCondition(term["kind"], None if ts is None else tuple(ts),
                                   term.get("tolerance")),
    )
    resources = []
    for i, r in enumerate(doc["resources"]):
        g = r.get("growth", {"kind": "zero"})
        growth = GrowthFunction(g["kind"], float(g.get("rate", 0.0)), g.get("capacity"))
        resources.append(ResourceSpec(r.get("name", f"r{i}"), float(r["stock0"]), growth))
    d = doc["demand"]
    if d["kind"] == "isoelastic":
        demand = DemandSystem.isoelastic(d["scale"], d["exponents"])
    else:
        demand = DemandSystem.linear(d["intercepts"], d["slopes"])
    if demand.n != len(resources):
        raise ConfigError(f"demand covers {demand.n} resources, config lists {len(resources)}")
    s = dict(doc.get("solver", {}))
    if "bracket" in s:
        s["bracket"] = tuple(s["bracket"])
    solver = SolverConfig(impact_scale=doc.get("externality", {}).get("impact_scale", 1.0), **s)
    oracle = None
    if "oracle" in doc:
        o = dict(doc["oracle"])
        if "bounds" in o:
            o["bounds"] = tuple(tuple(b) for b in o["bounds"])
        oracle = OracleConfig(**o)
    sweep = doc.get("sweep", {})
    for key, values in sweep.items():
        if not values:
            raise ConfigError(f"sweep range {key!r} is empty")
        _get_path(doc, key)
    return RunConfig(econ, resources, demand, solver, oracle, sweep,
                     doc.get("outputs", {}).get("figures", True), doc)


def load(path) -> RunConfig:
    return build(load_json(path))


def _split(key):
    return [int(k) if k.isdigit() else k for k in key.split(".")]


def _get_path(doc, key):
    node = doc
    try:
        for part in _split(key):
            node = node[part]
    except (KeyError, IndexError, TypeError):
        raise ConfigError(f"sweep key {key!r} does not name a config entry") from None
    if isinstance(node, (dict, list)):
        raise ConfigError(f"sweep key {key!r} must name a scalar")
    return node


def with_values(doc: dict, assignment: dict) -> dict:
    """Copy of ``doc`` with dotted-path scalars replaced; the sweep block is dropped."""
    out = copy.deepcopy(doc)
    out.pop("sweep", None)
    for key, value in assignment.items():
        parts = _split(key)
        node = out
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return out
