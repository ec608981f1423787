"""Experiment configuration files: schema, validation and typed access."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from . import geometry as geo
from .errors import ConfigError
from .potentials import Zero, potential_from_json
from .spectral import make_grid

SCHEMA_VERSION = 1
KINDS = ("simulate", "verify-bound", "sharpness", "check-potential", "symbol-audit",
         "tiling-constant", "cone-profile")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_axis = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1, "maxItems": 3}]}
_tagged = {"type": "object", "minProperties": 1, "maxProperties": 1}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "grid": {
            "type": "object", "required": ["d", "n", "length"], "additionalProperties": False,
            "properties": {"d": {"type": "integer", "minimum": 1, "maximum": 3},
                           "n": {"oneOf": [{"type": "integer", "minimum": 8},
                                           {"type": "array", "items": {"type": "integer", "minimum": 8}}]},
                           "length": {"oneOf": [_pos, {"type": "array", "items": _pos,
                                                        "minItems": 1, "maxItems": 3}]}, "origin": {"oneOf": [_axis, {"type": "null"}]}},
        },
        "potential": _tagged,
        "regions": {"type": "object", "additionalProperties": False,
                    "properties": {"X": _tagged, "Y": _tagged}},
        "physics": {"type": "object", "additionalProperties": False,
                    "properties": {"m": _pos, "c": _pos}},
        "time": {"type": "object", "additionalProperties": False,
                 "properties": {"dt": _pos, "T": {"type": "number", "minimum": 0},
                                "times": {"type": "array", "items": {"type": "number", "minimum": 0}}}},
        "state": {"type": "object", "additionalProperties": False,
                  "properties": {"center": {"type": "array", "items": _num},
                                 "width": _pos, "momentum": {"type": "array", "items": _num}}},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "object", "properties": {"dir": {"type": "string"}}},
        "mode": {"enum": ["state", "operator", "conjugated"]},
        "tolerance": _pos,
        "nonconvex": {"type": "object", "properties": {"r": _pos}},
        "simulate": {"type": "object", "properties": {"snapshot_every": {"type": "integer", "minimum": 1}}},
        "sharpness": {"type": "object", "required": ["delta", "eps", "times"],
                      "properties": {"delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                                     "eps": _pos, "seed_width": _pos,
                                     "times": {"type": "array", "items": _pos, "minItems": 1},
                                     "speeds": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                                     "margin_extra": {"type": "number", "minimum": 0}}},
        "admissibility": {"type": "object",
                          "properties": {"decomposition": {"enum": ["form", "bounded"]},
                                         "n_times": {"type": "integer", "minimum": 2}}},
        "audit": {"type": "object", "properties": {"n_samples": {"type": "integer", "minimum": 1}}},
        "tiling": {"type": "object", "required": ["dist", "r", "d"],
                   "properties": {"dist": _pos, "r": _pos, "d": {"type": "integer", "minimum": 1, "maximum": 3}}},
        "profile": {"type": "object", "required": ["width"], "properties": {"width": _pos}},
    },
}

FILE_SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "properties": {"schema_version": {"type": "integer"},
                   "experiments": {"type": "array", "items": EXPERIMENT_SCHEMA, "minItems": 1}},
}

# blocks each kind needs, as JSON paths relative to the experiment
REQUIRED = {
    "simulate": ("grid", "regions/X", "time/dt", "time/T"),
    "verify-bound": ("grid", "regions/X", "regions/Y", "time/dt", "time/times"),
    "sharpness": ("grid", "sharpness"),
    "check-potential": ("grid", "potential", "time/T"),
    "symbol-audit": ("grid",),
    "tiling-constant": ("tiling",),
    "cone-profile": ("grid", "regions/X", "time/dt", "time/times", "profile"),
}


@dataclass
class ExperimentConfig:
    """One validated experiment with parsed grid, potential and regions."""

    kind: str
    id: str
    raw: dict
    grid: object = None
    potential: object = field(default_factory=Zero)
    X: object = None
    Y: object = None
    seed: int = 0

    @property
    def m(self) -> float:
        return float(self.raw.get("physics", {}).get("m", 1.0))

    @property
    def c(self) -> float:
        return float(self.raw.get("physics", {}).get("c", 1.0))

    def time(self, key, default=None):
        return self.raw.get("time", {}).get(key, default)

    def block(self, key) -> dict:
        return self.raw.get(key, {})


def _ptr(path) -> str:
    return "".join(f"/{p}" for p in path)


def _has(obj, path: str) -> bool:
    for part in path.split("/"):
        if not isinstance(obj, dict) or part not in obj:
            return False
        obj = obj[part]
    return True


def _build(raw: dict, base: str, errors: list, default_kind=None, index=0) -> ExperimentConfig | None:
    kind = raw.get("kind", default_kind)
    if kind not in KINDS:
        errors.append((base + "/kind", f"unknown kind {kind!r}; supported kinds: {', '.join(KINDS)}"))
        return None
    if default_kind is not None and kind != default_kind:
        errors.append((base + "/kind", f"config kind {kind!r} does not match subcommand {default_kind!r}"))
        return None
    n_err = len(errors)
    for path in REQUIRED[kind]:
        if not _has(raw, path):
            errors.append((base + "/" + path, f"required for kind {kind!r}"))
    exp = ExperimentConfig(kind, raw.get("id", f"{index:03d}-{kind}"), raw, seed=raw.get("seed", 0))
    if "grid" in raw:
        g = raw["grid"]
        try:
            exp.grid = make_grid(g["d"], g["n"], g["length"], g.get("origin"))
        except (ValueError, TypeError) as exc:
            errors.append((base + "/grid", str(exc)))
    if "potential" in raw:
        try:
            exp.potential = potential_from_json(raw["potential"])
        except (ValueError, KeyError, TypeError) as exc:
            errors.append((base + "/potential", str(exc)))
    for name in ("X", "Y"):
        if name in raw.get("regions", {}):
            ptr = f"{base}/regions/{name}"
            try:
                region = geo.region_from_json(raw["regions"][name])
            except (ValueError, KeyError, TypeError) as exc:
                errors.append((ptr, str(exc)))
                continue
            setattr(exp, name, region)
            if exp.grid is not None and region.dim != exp.grid.d:
                errors.append((ptr, f"region dimension {region.dim} does not match {base}/grid/d = {exp.grid.d}"))
    times = raw.get("time", {}).get("times")
    if times is not None and any(b <= a for a, b in zip(times, times[1:])):
        errors.append((base + "/time/times", "sample times must be strictly increasing"))
    if kind == "tiling-constant" and "tiling" in raw:
        t = raw["tiling"]
        if t["dist"] <= t["r"] * t["d"] ** 0.5:
            errors.append((base + "/tiling/dist", "dist must exceed r * sqrt(d)"))
    if kind == "verify-bound" and exp.X is not None and exp.Y is not None:
        if raw.get("mode") == "conjugated" and not (exp.X.is_convex and exp.Y.is_convex):
            errors.append((base + "/mode", "conjugated mode needs convex X and Y"))
    return exp if len(errors) == n_err else None


def validate(doc, default_kind: str | None = None) -> list[ExperimentConfig]:
    """Validate a parsed config document; raise :class:`ConfigError` with every problem."""
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError([("", "config must be a JSON object")])
    if "experiments" in doc:
        top = FILE_SCHEMA
    else:
        top = {**EXPERIMENT_SCHEMA, "properties": {**EXPERIMENT_SCHEMA["properties"],
                                                   "schema_version": {"type": "integer"}},
               "required": ["schema_version"]}
    validator = jsonschema.Draft202012Validator(top)
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        errors.append((_ptr(err.absolute_path), err.message))
    if doc.get("schema_version") not in (None, SCHEMA_VERSION) and isinstance(doc.get("schema_version"), int):
        errors.append(("/schema_version", f"unsupported schema version {doc['schema_version']}; "
                                          f"this build reads version {SCHEMA_VERSION}"))
    entries = doc.get("experiments", [doc])
    base = "/experiments/{}" if "experiments" in doc else ""
    out = []
    schema_failed = bool(errors)
    for i, raw in enumerate(entries if isinstance(entries, list) else []):
        if not isinstance(raw, dict):
            continue
        try:
            exp = _build(raw, base.format(i), errors, default_kind, i)
        except (TypeError, KeyError, ValueError, AttributeError):
            # malformed blocks already carry a schema error
            if not schema_failed:
                raise
            continue
        if exp is not None:
            out.append(exp)
    ids = [e.id for e in out]
    if len(set(ids)) != len(ids):
        errors.append(("/experiments", "experiment ids must be unique"))
    if errors:
        raise ConfigError(errors)
    return out


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"{path} is not valid JSON: {exc}")]) from exc


def parse_config(path, default_kind: str | None = None) -> list[ExperimentConfig]:
    return validate(load(path), default_kind)
