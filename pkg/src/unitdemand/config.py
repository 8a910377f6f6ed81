"""Run configuration: JSON schema, validation and flag merging."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigError

SCHEMA_VERSION = 1

_DIST = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform_shift", "uniform", "power", "truncated_exponential", "beta", "table"]},
        "c": {"type": "number", "minimum": 0},
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "rate": {"type": "number"},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
        "x": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "F": {"type": "array", "items": {"type": "number"}, "minItems": 2},
    },
    "additionalProperties": False,
}

_OPTIMIZER = {
    "type": "object",
    "properties": {
        "iterations": {"type": "integer", "minimum": 2},
        "batch_log2": {"type": "integer", "minimum": 4, "maximum": 22},
        "kappa_start": {"type": "number", "exclusiveMinimum": 0},
        "kappa_end": {"type": "number", "exclusiveMinimum": 0},
        "lr_start": {"type": "number", "exclusiveMinimum": 0},
        "lr_end": {"type": "number", "exclusiveMinimum": 0},
        "restarts": {"type": "integer", "minimum": 1},
        "validation_log2": {"type": "integer", "minimum": 4, "maximum": 22},
        "evaluation_log2": {"type": "integer", "minimum": 4, "maximum": 24},
    },
    "additionalProperties": False,
}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "unitdemand run configuration",
    "type": "object",
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["price", "threshold", "threshold-table", "check-cdf", "solve-lp", "solve-menu",
                             "verify", "reproduce-figures"]},
        "n": {"type": "integer", "minimum": 2},
        "c": {"type": "number", "minimum": 0},
        "to": {"type": "integer", "minimum": 2},
        "distribution": _DIST,
        "distributions": {"type": "array", "items": _DIST, "minItems": 1},
        "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "grid": {"type": "integer", "minimum": 16},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "resolution": {"type": "integer", "minimum": 1},
        "placement": {"enum": ["center", "left"]},
        "lp_method": {"enum": ["cutting_plane", "full"]},
        "max_types": {"type": "integer", "minimum": 1},
        "menu_size": {"type": "integer", "minimum": 1},
        "optimizer": _OPTIMIZER,
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 100},
        "quadrature_order": {"type": "integer", "minimum": 2, "maximum": 128},
        "heatmap_resolution": {"type": "integer", "minimum": 3},
        "slice": {"type": "object", "additionalProperties": {"type": "number"}},
        "which": {"type": "array", "items": {"enum": ["fig2", "fig3", "fig4"]}, "minItems": 1},
        "solver": {"enum": ["menu", "lp"]},
        "output_dir": {"type": "string"},
        "csv": {"type": "boolean"},
        "trace": {"type": "boolean"},
    },
    "additionalProperties": False,
}


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_REPORT = {
    "type": "object",
    "required": ["condition_name", "passed", "worst_violation", "witness", "grid_resolution"],
    "properties": {
        "condition_name": {"enum": ["scale", "quantile_scaled", "elasticity", "stochastic_relative_values"]},
        "passed": {"type": "boolean"},
        "worst_violation": {"type": "number", "minimum": 0},
        "witness": {"type": "array", "items": _NUM},
        "grid_resolution": _INT,
    },
    "additionalProperties": False,
}
_THRESHOLD = {
    "type": "object",
    "required": ["n", "c_star", "residual", "bracket", "cross_check", "margin_at_root"],
    "properties": {"n": _INT, "c_star": _NUM, "residual": _NUM, "cross_check": {"type": ["number", "null"]},
                   "margin_at_root": {"type": ["number", "null"]},
                   "bracket": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
}
_MENU = {
    "type": "object",
    "required": ["n", "bundles", "options"],
    "properties": {
        "n": _INT,
        "bundles": {"type": "array", "items": {"type": "array", "items": _INT}},
        "options": {"type": "array", "items": {
            "type": "object", "required": ["lottery", "price"],
            "properties": {"lottery": {"type": "array", "items": _NUM}, "price": {"type": "number", "minimum": 0}}}},
    },
}
_BOUNDARY = {"type": "object", "required": ["price", "mismatches", "points"],
             "properties": {"price": _NUM, "mismatches": _INT, "points": _INT}}


def _wrapped(inner: dict) -> dict:
    return {"type": "object", "required": ["result"], "properties": {"result": inner}, "additionalProperties": False}


OUTPUT_SCHEMAS = {
    "price": _wrapped({"type": "object", "required": ["n", "c", "price", "revenue", "residual", "method"],
                       "properties": {"n": _INT, "price": _NUM, "revenue": _NUM, "residual": _NUM,
                                      "iterations": _INT, "method": {"type": "string"}}}),
    "threshold": _wrapped({**_THRESHOLD, "required": _THRESHOLD["required"] + ["ln_n_over_3"]}),
    "threshold-table": _wrapped({"type": "array", "items": _THRESHOLD, "minItems": 1}),
    "check-cdf": {
        "type": "object",
        "required": ["distribution", "reports"],
        "properties": {"distribution": _DIST, "reports": {"type": "array", "items": _REPORT, "minItems": 3}},
        "additionalProperties": False,
    },
    "solve-lp": _wrapped({"type": "object",
                          "required": ["objective", "status", "types", "max_ic_violation", "max_ir_violation", "menu"],
                          "properties": {"objective": _NUM, "status": {"enum": ["optimal", "unconverged"]},
                                         "types": _INT, "menu": _MENU, "sale_boundary": _BOUNDARY}}),
    "solve-menu": _wrapped({"type": "object", "required": ["menu", "revenue_estimate"],
                            "properties": {"menu": _MENU, "revenue_estimate": _NUM, "grid_revenue": _NUM,
                                           "sale_boundary": _BOUNDARY}}),
    "verify": _wrapped({"type": "object", "required": ["n", "c", "p", "checks", "verdict"],
                        "properties": {"verdict": {"enum": ["optimal", "not_optimal", "inconclusive"]},
                                       "checks": {"type": "array", "items": {
                                           "type": "object", "required": ["check", "value", "pass"]}}}}),
    "reproduce-figures": {
        "type": "object",
        "minProperties": 1,
        "propertyNames": {"enum": ["fig2", "fig3", "fig4"]},
        "additionalProperties": {
            "type": "object",
            "required": ["boundary_price", "oracle_price", "cell_width", "within_one_cell", "solver"],
            "properties": {"boundary_price": _NUM, "oracle_price": _NUM, "cell_width": _NUM,
                           "within_one_cell": {"type": "boolean"}, "solver": {"enum": ["menu", "lp"]}},
        },
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error", "message", "exit_code"],
    "properties": {"error": {"type": "string"}, "message": {"type": "string"},
                   "exit_code": {"enum": [2, 3, 4]}, "diagnostics": {"type": "object"}},
    "additionalProperties": False,
}


def validate_config(config: dict) -> dict:
    try:
        jsonschema.validate(config, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return config


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {"schema_version": SCHEMA_VERSION}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(config)


def merge_flags(config: dict, flags: dict) -> dict:
    """Flags given on the command line (not ``None``) override the config file."""
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return validate_config(merged)
