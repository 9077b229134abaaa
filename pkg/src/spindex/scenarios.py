"""Scenario files: JSON schema, range checks and the builtin catalog."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from ._io import SCHEMA_VERSION
from .hamiltonian import HamiltonianSpec, TwistPerturbation, fourier_perturbation, twisted

GOLDEN = 0.6180339887498949

_HAM_KINDS = ["zero", "rotation", "perturbed_rotation", "tabulated", "twisted"]

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["hamiltonian"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"type": "string"},
        "name": {"type": "string"},
        "hamiltonian": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": _HAM_KINDS},
                "params": {"type": "object"},
                "schedule": {
                    "type": "object",
                    "properties": {"delta_h": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                                   "zeta": {"enum": ["smoothstep", "smootherstep"]}},
                },
            },
        },
        "twist": {
            "type": "object",
            "required": ["lambda0"],
            "properties": {
                "center": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                "lambda0": {"type": "number", "minimum": 0},
                "support_radius": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "profile": {"enum": ["bump", "constant"]},
            },
        },
        "perturbation": {
            "type": "object",
            "properties": {"eps": {"type": "number"}, "modes": {"type": "integer", "minimum": 0, "maximum": 8}},
        },
        "k": {"type": "integer", "minimum": 1, "maximum": 64},
        "census": {
            "type": "object",
            "properties": {
                "grid": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                "newton_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-10},
            },
        },
        "resonance": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "N": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "a_max": {"type": "integer", "minimum": 1, "maximum": 20},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "glue": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "gap_iterates": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "grid": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
            },
        },
        "plots": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    },
}

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "name": "custom",
    "k": 1,
    "census": {"grid": [32, 64], "newton_tol": 1e-10},
    "resonance": {"enabled": True, "N": 2, "n": 1, "a_max": 6, "tol": 1e-6},
    "glue": {"enabled": False, "tau": 0.5, "gap_iterates": [4, 8, 16], "grid": [64, 128]},
    "plots": True,
    "seed": 0,
}

BUILTIN: dict[str, dict[str, Any]] = {
    "rotation-golden": {
        "hamiltonian": {"kind": "rotation", "params": {"alpha": GOLDEN}},
        "glue": {"enabled": True},
    },
    "rotation-sqrt2": {
        "hamiltonian": {"kind": "rotation", "params": {"alpha": math.sqrt(2.0) - 1.0}},
    },
    "rotation-third": {
        "hamiltonian": {"kind": "rotation", "params": {"alpha": 1.0 / 3.0}},
        "k": 3,
    },
    "twisted-golden": {
        "hamiltonian": {"kind": "rotation", "params": {"alpha": GOLDEN}},
        "twist": {"center": [0.0, 0.0, 1.0], "lambda0": 0.2, "support_radius": 0.5},
    },
    "island-pair": {
        "hamiltonian": {"kind": "perturbed_rotation",
                        "params": {"alpha": GOLDEN, "eps": 0.17, "m": 1, "beta": 1.018, "profile": "bulge"}},
        "glue": {"enabled": True},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _line_of(text: str | None, path: list) -> int | None:
    """Line of the last named key on the error path, as a best effort."""
    if not text:
        return None
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = json.dumps(keys[-1]) + ":"
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line.replace('" :', '":'):
            return i
    return None


def validate(data: Any, text: str | None = None) -> list[str]:
    """Schema and range diagnostics; an empty list means the scenario is valid."""
    diags = []
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        line = _line_of(text, list(err.absolute_path))
        prefix = f"line {line}: " if line else ""
        diags.append(f"{prefix}{where}: {err.message}")
    if diags or not isinstance(data, dict):
        return diags
    ham = data["hamiltonian"]
    params = ham.get("params", {}) or {}
    if ham["kind"] in ("rotation", "perturbed_rotation"):
        alpha = params.get("alpha")
        if not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
            diags.append(f"hamiltonian/params/alpha: {alpha!r} is outside (0, 1)")
    if ham["kind"] == "perturbed_rotation" and params.get("profile", "linear") not in ("linear", "bulge"):
        diags.append("hamiltonian/params/profile: must be 'linear' or 'bulge'")
    grid = data.get("census", {}).get("grid")
    if grid and (grid[0] < 32 or grid[1] < 64):
        diags.append(f"census/grid: {grid} is below the minimum density 32x64")
    res = data.get("resonance", {})
    if res.get("N", 2) < res.get("n", 1) + 1:
        diags.append("resonance: need N >= n + 1")
    return diags


class ScenarioError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Scenario:
    config: dict[str, Any]

    @property
    def name(self) -> str:
        return self.config["name"]

    def hamiltonian(self) -> HamiltonianSpec:
        cfg = self.config
        spec = HamiltonianSpec.from_dict(cfg["hamiltonian"])
        pert = cfg.get("perturbation")
        if pert and pert.get("eps", 0.0):
            spec = fourier_perturbation(spec, float(pert["eps"]), int(cfg["seed"]), int(pert.get("modes", 3)))
        tw = cfg.get("twist")
        if tw and tw.get("lambda0", 0.0):
            spec = twisted(spec, TwistPerturbation.from_dict(tw))
        return spec


def load(source: str | Path | dict, seed: int | None = None) -> Scenario:
    """Scenario from a builtin name, a JSON file, or a dict; raises ScenarioError."""
    text = None
    if isinstance(source, dict):
        data = source
    elif str(source) in BUILTIN:
        data = _merge({"name": str(source)}, BUILTIN[str(source)])
    else:
        text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"line {exc.lineno}: invalid JSON ({exc.msg})"]) from exc
    diags = validate(data, text)
    if diags:
        raise ScenarioError(diags)
    cfg = _merge(DEFAULTS, data)
    if seed is not None:
        cfg["seed"] = int(seed)
    return Scenario(cfg)
