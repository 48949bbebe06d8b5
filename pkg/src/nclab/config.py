"""JSON run configuration: schema, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import jsonschema
import numpy as np

from .conditions import min_n1_for_contraction, quota_search, solve_theta
from .errors import ParseError, SchemaError
from .model import ChannelParams, EigenBlock, SystemSpec, validate_system
from .sched import ADAPTIVE_TDMA, FIXED_TDMA, KINDS, OPTIMAL2D
from .sim import SchedulerConfig

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_posint = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "channel"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["B"],
            "properties": {
                "eigen_ln": {"type": "array", "items": {"type": "number", "minimum": 0},
                             "minItems": 1},
                "blocks": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["ln"],
                        "properties": {
                            "ln": {"type": "number"},
                            "complex": {"type": "boolean"},
                            "multiplicity": _posint,
                            "angle": _num,
                        },
                    },
                },
                "A": _mat,
                "B": _vec,
                "sigma_x0": _mat,
                "K": _vec,
            },
        },
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["power", "noise_var", "drop_prob"],
            "properties": {
                "power": _pos,
                "noise_var": _pos,
                "drop_prob": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "scheduler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(KINDS)},
                "quotas": {"type": "array", "items": _posint, "minItems": 1},
                "n1": _posint,
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 1, "maximum": 10_000},
                "trials": _posint,
                "rounds": _posint,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": ["string", "null"]},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 600
    trials: int = 100
    rounds: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class OutputSettings:
    path: Optional[str] = None
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec
    channel: ChannelParams
    scheduler: SchedulerConfig
    sim: SimSettings
    output: OutputSettings
    gain: Optional[Tuple[float, ...]] = None


def _reject_constant(name):
    raise ParseError(f"non-finite number {name} in config")


def load_json(text: str) -> dict:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    return doc


def check_schema(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = ".".join(filter(None, [path, extra[0] if extra else ""]))
            raise SchemaError("unknown field", path)
        raise SchemaError(err.message, path or "<root>")


def _system(sec: dict) -> SystemSpec:
    if "blocks" in sec and "eigen_ln" in sec:
        raise SchemaError("give either eigen_ln or blocks, not both", "system")
    cov = sec.get("sigma_x0")
    if "eigen_ln" in sec and "A" not in sec:
        return SystemSpec.from_log_magnitudes(sec["eigen_ln"], sec["B"], cov)
    if "blocks" in sec:
        blocks = tuple(EigenBlock(b["ln"], b.get("complex", False), b.get("multiplicity", 1),
                                  b.get("angle", 0.0)) for b in sec["blocks"])
    elif "eigen_ln" in sec:
        blocks = tuple(EigenBlock(x) for x in sec["eigen_ln"])
    else:
        blocks = ()
    if not blocks and "A" not in sec:
        raise SchemaError("one of eigen_ln, blocks or A is required", "system")
    return validate_system(SystemSpec(
        blocks, np.asarray(sec["B"], float),
        None if cov is None else np.asarray(cov, float),
        None if "A" not in sec else np.asarray(sec["A"], float)))


def _scheduler(sec: dict, spec: SystemSpec, ch: ChannelParams) -> SchedulerConfig:
    kind = sec.get("kind", ADAPTIVE_TDMA)
    quotas = sec.get("quotas")
    n1 = sec.get("n1")
    if kind == ADAPTIVE_TDMA and quotas is None:
        quotas = quota_search(spec, ch)
    elif kind == FIXED_TDMA and quotas is None:
        quotas = (1,) * len(spec.blocks)
    elif kind == OPTIMAL2D and n1 is None:
        ln = spec.log_magnitudes
        if ln.size != 2:
            raise SchemaError("optimal2d needs exactly two modes", "scheduler.kind")
        n1 = min_n1_for_contraction(solve_theta(ln[0], ln[1], ch), ln[0], ch)
    return SchedulerConfig(kind, None if quotas is None else tuple(quotas), n1)


def config_from_dict(doc: dict) -> RunConfig:
    check_schema(doc)
    sysd = doc["system"]
    spec = _system(sysd)
    ch = ChannelParams(**doc["channel"])
    sched = _scheduler(doc.get("scheduler", {}), spec, ch)
    sim = SimSettings(**doc.get("sim", {}))
    out = OutputSettings(**doc.get("output", {}))
    gain = tuple(sysd["K"]) if "K" in sysd else None
    if gain is not None and len(gain) != spec.state_dim:
        raise SchemaError(f"expected {spec.state_dim} entries", "system.K")
    for v in (gain or ()):
        if not math.isfinite(v):
            raise SchemaError("non-finite gain", "system.K")
    return RunConfig(spec, ch, sched, sim, out, gain)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises :class:`ParseError` for malformed JSON, :class:`SchemaError` for
    structural problems (message prefixed with the dotted field path) and
    the :mod:`nclab.model` validation errors for inadmissible plants.
    """
    return config_from_dict(load_json(text))
