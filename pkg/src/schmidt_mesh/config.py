"""Experiment configuration: TOML in, schema-validated dict with defaults resolved out."""
from __future__ import annotations

import copy
import math
from pathlib import Path

import jsonschema
import tomli

from .trainer import TrainingSchedule

SCENARIOS = ("decompose", "spdc", "noise_sweep", "distribute", "scaling", "supermode")


class ConfigError(ValueError):
    pass


_number = {"type": "number"}
_transmission = {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                           {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}]}
_target = {
    "type": "object",
    "properties": {"value": _number, "tol": {"type": "number", "minimum": 0}},
    "required": ["value", "tol"],
    "additionalProperties": False,
}

_SOURCE_PROPS = {
    "kind": {"enum": ["random", "spdc", "degenerate", "bell", "embedded_bell", "schmidt", "csv", "mixed"]},
    "n_a": {"type": "integer", "minimum": 1},
    "n_b": {"type": "integer", "minimum": 1},
    "n": {"type": "integer", "minimum": 2},
    "seed": {"type": "integer", "minimum": 0},
    "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    "tail": {"type": "number", "minimum": 0},
    "preset": {"enum": ["unfiltered", "filtered", "gvm"]},
    "n_bins": {"type": "integer", "minimum": 2},
    "sigma": {"type": "number", "exclusiveMinimum": 0},
    "sigma_f": {"type": "number", "exclusiveMinimum": 0},
    "gvm": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
    "crystal_length": {"type": "number", "minimum": 0},
    "path": {"type": "string"},
    "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
}
_SOURCE = {
    "type": "object",
    "properties": {
        **_SOURCE_PROPS,
        "components": {"type": "array", "minItems": 1, "items": {
            "type": "object", "properties": dict(_SOURCE_PROPS), "required": ["kind"], "additionalProperties": False}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "method": {"enum": ["power", "coincidence"]},
        "topology": {"enum": ["diagonal", "tree"]},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "output_dir": {"type": "string"},
        "source": _SOURCE,
        "schedule": {
            "type": "object",
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "beta1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "adam_epsilon": {"type": "number", "minimum": 0},
                "max_iters_per_layer": {"type": "integer", "minimum": 0},
                "convergence_window": {"type": "integer", "minimum": 1},
                "convergence_tol": {"type": "number", "minimum": 0},
                "gradient_method": {"enum": ["analytic", "dither"]},
                "dither_delta": {"type": "number", "exclusiveMinimum": 0},
                "residual_stop": {"type": "number", "minimum": 0},
                "jitter": {"type": "number", "minimum": 0},
                "init": {"enum": ["zero", "random"]},
                "joint_updates": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "measurement": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["exact", "shot_noise"]},
                "pairs_per_evaluation": {"type": "number"},
                "calibrate": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "loss": {
            "type": "object",
            "properties": {k: _transmission for k in ("input_a", "input_b", "output_a", "output_b")},
            "additionalProperties": False,
        },
        "noise_sweep": {
            "type": "object",
            "properties": {"budgets": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
            "additionalProperties": False,
        },
        "distribute": {
            "type": "object",
            "properties": {"channel_seeds": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                             "minItems": 2, "maxItems": 2}},
            "additionalProperties": False,
        },
        "scaling": {
            "type": "object",
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2},
                "target_fidelity": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "supermode": {
            "type": "object",
            "properties": {
                "phases": {"type": "array", "items": _number, "minItems": 1},
                "tol_deg": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "assertions": {
            "type": "object",
            "properties": {
                "entropy_bits": _target,
                "values": {
                    "type": "object",
                    "properties": {"value": {"type": "array", "items": _number}, "tol": {"type": "number", "minimum": 0}},
                    "required": ["value", "tol"],
                    "additionalProperties": False,
                },
                "min_fidelity": _number,
                "max_value_error": _number,
                "max_entropy_rel_error": _number,
                "max_crosstalk": _number,
                "min_crosstalk": _number,
                "min_diagonal_sum": _number,
                "max_scaling_exponent": _number,
                "noise_monotone": {"type": "boolean"},
                "max_final_entropy_rel_error": _number,
                "supermode_entropy_bits": _target,
                "max_supermode_overlap": _number,
            },
            "additionalProperties": False,
        },
    },
    "required": ["scenario", "source"],
    "additionalProperties": False,
}

DEFAULTS = {
    "method": "coincidence",
    "topology": "diagonal",
    "seeds": [0],
    "schedule": {},
    "measurement": {"kind": "exact", "pairs_per_evaluation": 1e6, "calibrate": True},
    "loss": {},
    "assertions": {},
}
SCENARIO_DEFAULTS = {
    "noise_sweep": {"noise_sweep": {"budgets": [1e3, 1e4, 1e5, 1e6]}},
    "distribute": {"distribute": {}},
    "scaling": {"scaling": {"sizes": [4, 8, 16, 32], "target_fidelity": 0.99}},
    "supermode": {"supermode": {"phases": [0.0, math.pi], "tol_deg": 0.01}},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def _describe(err: jsonschema.ValidationError) -> str:
    where = ".".join(str(p) for p in err.absolute_path) or "<root>"
    return f"field {where}: {err.message}"


def validate(raw: dict) -> dict:
    """Schema-check ``raw`` and return it with defaults filled in."""
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(raw), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))
    cfg = _merge(DEFAULTS, SCENARIO_DEFAULTS.get(raw["scenario"], {}))
    cfg = _merge(cfg, raw)
    cfg.setdefault("output_dir", f"runs/{cfg['scenario']}")
    defaults = {k: v for k, v in TrainingSchedule().to_dict().items() if k != "seed"}
    cfg["schedule"] = {**defaults, **cfg["schedule"]}
    try:
        TrainingSchedule(**cfg["schedule"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field schedule: {exc}") from exc
    if cfg["scenario"] == "spdc" and cfg["source"]["kind"] != "spdc":
        raise ConfigError("field source.kind: the spdc scenario needs an spdc source")
    if cfg["scenario"] == "supermode" and cfg["source"]["kind"] not in ("degenerate", "schmidt", "bell", "embedded_bell", "csv"):
        raise ConfigError("field source.kind: the supermode scenario needs a pure degenerate source")
    if cfg["source"]["kind"] == "mixed":
        comps = cfg["source"].get("components")
        if not comps:
            raise ConfigError("field source.components: a mixed source needs components")
        if len(cfg["source"].get("weights", [])) != len(comps):
            raise ConfigError("field source.weights: need one weight per component")
    if cfg["measurement"]["kind"] == "shot_noise" and cfg["schedule"].get("gradient_method", "analytic") == "analytic":
        raise ConfigError("field schedule.gradient_method: shot-noise runs need the dither method")
    return cfg


def loads(text: str) -> dict:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax: {exc}") from exc
    return validate(raw)


def load(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = loads(text)
    cfg["_base_dir"] = str(path.parent)
    return cfg
