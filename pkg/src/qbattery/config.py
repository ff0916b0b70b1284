"""Simulation configuration: JSON document, schema validation, key=value overrides."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from . import states

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        {
            "type": "object",
            "properties": {"min": _POS, "max": _POS, "points": {"type": "integer", "minimum": 1}},
            "required": ["min", "max", "points"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "charger": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(states.CHARGER_KINDS)},
                "n": {"type": "integer", "minimum": 0},
                "alpha": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]},
                "nbar": {"type": "number", "minimum": 0},
                "r": {"type": "number", "minimum": 0},
                "theta": _NUM,
                "n_th": {"type": "number", "minimum": 0},
                "mean": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "g1": {"type": "number", "minimum": 0},
        "g2": {"type": "number", "minimum": 0},
        "frame": {"enum": ["interaction", "lab"]},
        "omega_c": _POS,
        "omega_q": _POS,
        "n_max": {"oneOf": [{"const": "auto"}, {"type": "integer", "minimum": 1}]},
        "horizon": _POS,
        "grid_points": {"type": "integer", "minimum": 2},
        "gamma": {"type": "number", "minimum": 0},
        "integrator_rel_tol": _POS,
        "abs_tol": _POS,
        "tail_tol": _POS,
        "n_range": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "n_th_grid": _GRID,
        "gamma_grid": _GRID,
        "heatmap_n": {"type": "integer", "minimum": 0},
        "mean_n": {"type": "number", "minimum": 0},
        "tau": {"type": "number", "minimum": 0},
        "wigner_grid": {
            "type": "object",
            "properties": {"min": _NUM, "max": _NUM, "points": {"type": "integer", "minimum": 2}},
            "required": ["min", "max", "points"],
            "additionalProperties": False,
        },
        "delta1": _NUM,
        "delta2": _NUM,
        "refine": {"type": "boolean"},
        "output": {
            "type": "object",
            "properties": {
                "format": {"enum": ["csv", "json"]},
                "plot": {"enum": ["none", "svg"]},
                "path": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "charger": {"kind": "fock", "n": 7},
    "g1": 1.0,
    "g2": 1.0,
    "frame": "interaction",
    "omega_c": 1.0,
    "omega_q": 1.0,
    "n_max": "auto",
    "horizon": 2 * math.pi,
    "grid_points": 2001,
    "gamma": 0.0,
    "integrator_rel_tol": 1e-8,
    "abs_tol": 1e-10,
    "tail_tol": states.TAIL_THRESHOLD,
    "n_range": [1, 10],
    "n_th_grid": {"min": 1e-3, "max": 100.0, "points": 40},
    "gamma_grid": {"min": 1e-3, "max": 100.0, "points": 40},
    "heatmap_n": 7,
    "mean_n": 7.0,
    "tau": math.pi,
    "wigner_grid": {"min": -3.0, "max": 3.0, "points": 201},
    "delta1": 0.0,
    "delta2": 0.0,
    "refine": True,
    "output": {"format": "csv", "plot": "none", "path": None},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if k == "charger" and "kind" in v and v["kind"] != out[k].get("kind"):
            out[k] = copy.deepcopy(v)  # fields depend on the kind; a new kind starts fresh
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _check_finite(obj, path="config"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(f"{path}: non-finite number")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides:
        keys, value = parse_override(item)
        node = doc
        for k in keys[:-1]:
            if not isinstance(node.setdefault(k, {}), dict):
                raise ConfigError(f"override {item!r}: {k!r} is not an object")
            node = node[k]
        node[keys[-1]] = value
    return doc


def _charger_from_doc(doc: dict) -> states.ChargerSpec:
    kind = doc["kind"]
    fields = set(doc) - {"kind"}
    try:
        if "mean" in doc:
            if fields != {"mean"}:
                raise ConfigError("charger 'mean' excludes other charger fields")
            return states.charger_from_mean(kind, doc["mean"])
        allowed = {
            "fock": {"n"}, "coherent": {"alpha"}, "thermal": {"nbar"},
            "squeezed": {"r", "theta"}, "thermalized_fock": {"n", "n_th"},
        }[kind]
        if not fields <= allowed:
            raise ConfigError(f"charger kind {kind!r} does not take {sorted(fields - allowed)}")
        if kind == "fock":
            return states.Fock(doc.get("n", 7))
        if kind == "coherent":
            a = doc.get("alpha", math.sqrt(7))
            return states.Coherent(complex(a[0], a[1]) if isinstance(a, list) else complex(a))
        if kind == "thermal":
            return states.Thermal(doc.get("nbar", 7.0))
        if kind == "squeezed":
            return states.SqueezedVacuum(doc.get("r", math.asinh(math.sqrt(7))), doc.get("theta", 0.0))
        return states.ThermalizedFock(doc.get("n", 7), doc.get("n_th", 0.0))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"charger: {exc}") from exc


def charger_to_doc(spec: states.ChargerSpec) -> dict:
    if isinstance(spec, states.Fock):
        return {"kind": "fock", "n": spec.n}
    if isinstance(spec, states.Coherent):
        a = complex(spec.alpha)
        return {"kind": "coherent", "alpha": [a.real, a.imag]}
    if isinstance(spec, states.Thermal):
        return {"kind": "thermal", "nbar": spec.nbar}
    if isinstance(spec, states.SqueezedVacuum):
        return {"kind": "squeezed", "r": spec.r, "theta": spec.theta}
    return {"kind": "thermalized_fock", "n": spec.n, "n_th": spec.n_th}


def _grid(spec) -> np.ndarray:
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if spec["max"] < spec["min"]:
        raise ConfigError("grid max must be >= min")
    return np.geomspace(spec["min"], spec["max"], spec["points"])


@dataclass(frozen=True)
class SimConfig:
    """Validated run parameters. ``doc`` keeps the full JSON form for provenance."""

    doc: dict = field(repr=False)

    @classmethod
    def from_dict(cls, doc: dict | None = None, overrides: list[str] | None = None) -> SimConfig:
        doc = {} if doc is None else doc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = apply_overrides(doc, overrides or [])
        try:
            jsonschema.validate(doc, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = ".".join(str(p) for p in exc.absolute_path) or "config"
            raise ConfigError(f"{where}: {exc.message}") from None
        _check_finite(doc)
        full = _merge(DEFAULTS, doc)
        cfg = cls(full)
        cfg.charger  # validate charger fields now
        lo, hi = full["n_range"]
        if hi < lo:
            raise ConfigError("n_range must be [low, high] with low <= high")
        for key in ("n_th_grid", "gamma_grid"):
            _grid(full[key])
        w = full["wigner_grid"]
        if w["max"] <= w["min"]:
            raise ConfigError("wigner_grid max must exceed min")
        return cfg

    @classmethod
    def from_json(cls, text: str, overrides: list[str] | None = None) -> SimConfig:
        try:
            doc = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc, overrides)

    def replace(self, **changes) -> SimConfig:
        doc = copy.deepcopy(self.doc)
        for k, v in changes.items():
            doc[k] = charger_to_doc(v) if k == "charger" and not isinstance(v, dict) else v
        return SimConfig(doc)

    def __getattr__(self, name):
        doc = object.__getattribute__(self, "doc")
        if name in doc:
            return doc[name]
        raise AttributeError(name)

    @property
    def charger(self) -> states.ChargerSpec:
        return _charger_from_doc(self.doc["charger"])

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.doc["horizon"], self.doc["grid_points"])

    @property
    def n_values(self) -> list[int]:
        lo, hi = self.doc["n_range"]
        return list(range(lo, hi + 1))

    @property
    def n_th_values(self) -> np.ndarray:
        return _grid(self.doc["n_th_grid"])

    @property
    def gamma_values(self) -> np.ndarray:
        return _grid(self.doc["gamma_grid"])

    @property
    def wigner_axis(self) -> np.ndarray:
        w = self.doc["wigner_grid"]
        return np.linspace(w["min"], w["max"], w["points"])

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True)
