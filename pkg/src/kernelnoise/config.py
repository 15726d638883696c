"""Experiment config schema and builders from config fragments."""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .measure_space import GridMeasure, GroundSpace, sets_from_spec

EXPERIMENTS = (
    "psd-check", "rkhs-norm", "dominance", "simulate", "ito-isometry", "qv",
    "ito-lemma", "fourier", "markov-interpolate", "frames", "transforms",
    "functionals", "factorize",
)

_num = {"type": "number"}
_int = {"type": "integer"}
_pos = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": _num}

SPACE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["interval", "finite"]},
        "a": _num, "b": _num, "cells": _pos, "states": _pos,
    },
}

MEASURE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["lebesgue", "counting", "density", "gaussian"]},
        "density_values": _numlist,
        "mean": _num, "sigma": {"type": "number", "exclusiveMinimum": 0},
        "truncate": _num,
    },
}

SET = {
    "oneOf": [
        {"const": "all"},
        {"type": "object", "additionalProperties": False, "required": ["cells"],
         "properties": {"cells": {"type": "array", "items": _int}}},
        {"type": "object", "additionalProperties": False, "required": ["range"],
         "properties": {"range": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}}},
        {"type": "object", "additionalProperties": False, "required": ["interval"],
         "properties": {"interval": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}},
    ]
}

KERNEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["set_intersection", "mass_product", "brownian_min", "szego",
                            "gaussian_rbf", "tabulated", "scaled"]},
        "bandwidth": {"type": "number", "exclusiveMinimum": 0},
        "matrix": {"type": "array", "items": _numlist},
        "index": {"type": "array"},
        "factor": _num,
        "base": {"$ref": "#/definitions/kernel"},
    },
}

FUNCTION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"enum": ["const", "identity", "square", "sin", "cos", "exp", "gauss"]},
        "poly": _numlist,
        "values": _numlist,
        "scale": _num, "amp": _num, "center": _num, "width": _num,
    },
}

ATOM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["at"],
    "properties": {"at": _num, "order": {"type": "integer", "minimum": 0}, "weight": _num},
}

SPAN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["coeffs", "points"],
    "properties": {"coeffs": _numlist, "points": _numlist},
}

COMMON = {
    "experiment": {"enum": list(EXPERIMENTS)},
    "seed": {"type": "integer", "minimum": 0},
    "replicas": {"type": "integer", "minimum": 2},
    "tolerances": {"type": "object", "additionalProperties": _num},
    "description": {"type": "string"},
}

SPECIFIC = {
    "psd-check": {
        "space": SPACE, "measure": MEASURE, "kernels": {"type": "array", "items": KERNEL},
        "points": _numlist, "sets": {"type": "array", "items": SET},
        "random_samples": {"type": "object", "additionalProperties": False,
                           "properties": {"count": _pos, "max_size": _pos}},
        "brownian_anchor": {"type": "object", "additionalProperties": False,
                            "properties": {"cells": _pos}},
    },
    "rkhs-norm": {
        "space": SPACE, "measure": MEASURE, "kernel": KERNEL, "points": _numlist,
        "psi": {"type": "object", "additionalProperties": False,
                "properties": {"values": _numlist, "section": _num, "monomial": _int}},
        "expected": _num, "nested": {"type": "boolean"}, "phi": FUNCTION,
    },
    "dominance": {
        "space": SPACE, "measure": MEASURE, "kernel1": KERNEL, "kernel2": KERNEL,
        "points": _numlist, "sets": {"type": "array", "items": SET},
        "expected": _num,
        "random_tabulated": {"type": "object", "additionalProperties": False,
                             "properties": {"count": _pos, "size": _pos}},
    },
    "simulate": {
        "space": SPACE, "measure": MEASURE, "sets": {"type": "array", "items": SET},
        "pairs": {"type": "array", "items": {"type": "array", "items": _int}},
        "random_pairs": _pos,
        "kl": {"type": "object", "additionalProperties": False,
               "properties": {"basis": {"enum": ["haar", "indicator"]},
                              "random_pairs": _pos, "replicas": _int}},
        "skip_mc": {"type": "boolean"},
    },
    "ito-isometry": {
        "space": SPACE, "measure": MEASURE,
        "integrands": {"type": "array", "items": FUNCTION},
        "random_integrands": _pos,
        "characteristic": {"type": "array", "items": FUNCTION},
        "isometry_pair": {"type": "object", "additionalProperties": False,
                          "properties": {"coarse": _pos, "refinement": _int,
                                         "density": FUNCTION, "random_h": _pos}},
    },
    "qv": {
        "space": SPACE, "measure": MEASURE, "base": SET,
        "initial_blocks": _pos, "levels": {"type": "integer", "minimum": 0},
    },
    "ito-lemma": {
        "space": SPACE, "measure": MEASURE,
        "function": {"enum": ["linear", "square", "cos", "sin", "exp"]},
        "t": _num, "cell_levels": {"type": "array", "items": _pos},
        "cases": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["function"],
            "properties": {"function": {"enum": ["linear", "square", "cos", "sin", "exp"]},
                           "t": _num, "cell_levels": {"type": "array", "items": _pos}}}},
    },
    "fourier": {
        "space": SPACE, "measure": MEASURE,
        "pairs": {"type": "array", "items": {"type": "array", "items": _num,
                                             "minItems": 2, "maxItems": 2}},
        "shift": _num, "rescale": {"type": "boolean"},
        "schwartz": {"type": "object", "additionalProperties": False,
                     "properties": {"center": _num, "width": _num,
                                    "window": _numlist, "points": _pos}},
    },
    "markov-interpolate": {
        "states": _pos, "kernel_file": {"type": "string"}, "kernel_seed": _int,
        "x": _int, "n": {"type": "array", "items": {"type": "integer", "minimum": 2}},
        "sets": {"type": "array", "items": SET},
        "pairs": {"type": "array", "items": {"type": "array", "items": _int}},
        "random_pairs": _pos,
    },
    "frames": {
        "order": _pos, "grid": {"type": "object", "additionalProperties": False,
                                "properties": {"lo": _num, "hi": _num, "count": _pos}},
        "tests": {"type": "array", "items": SPAN},
        "continuous": {"type": "object", "additionalProperties": False,
                       "properties": {"space": SPACE, "measure": MEASURE,
                                      "times": _numlist, "random_spans": _pos}},
    },
    "transforms": {
        "features": {"type": "object", "additionalProperties": False,
                     "required": ["family"],
                     "properties": {"family": {"enum": ["szego", "brownian"]},
                                    "order": _pos, "points": _numlist,
                                    "space": SPACE, "measure": MEASURE}},
        "random_spans": _pos, "random_h": _pos,
    },
    "functionals": {
        "kernel": KERNEL, "orthogonality_order": {"type": "integer", "minimum": 0},
        "pairings": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["xi", "eta"],
            "properties": {"xi": {"type": "array", "items": ATOM},
                           "eta": {"type": "array", "items": ATOM}, "expected": _num}}},
        "delta_expansion": {"type": "object", "additionalProperties": False,
                            "properties": {"x": _num, "y": _num, "order": _pos}},
        "metric_points": _numlist,
    },
    "factorize": {
        "space": SPACE, "measure": MEASURE, "kernel": KERNEL,
        "factor": {"enum": ["indicator", "rank_one"]},
        "sets": {"type": "array", "items": SET},
        "pairs": {"type": "array", "items": {"type": "array", "items": _int}},
    },
}


def schema_for(experiment: str) -> dict:
    props = dict(COMMON)
    props.update(SPECIFIC[experiment])
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["experiment"],
        "properties": props,
        "definitions": {"kernel": KERNEL},
    }


def validate(cfg) -> dict:
    """Validate a parsed config; errors carry the offending field path."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"config.experiment: unknown experiment {exp!r}")
    v = jsonschema.Draft7Validator(schema_for(exp))
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            path = ".".join(str(p) for p in e.absolute_path)
            msgs.append(f"config{'.' + path if path else ''}: {e.message}")
        raise ConfigError("; ".join(msgs))
    return cfg


def load(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc})") from None
    return validate(cfg)


def build_space(spec: dict) -> GroundSpace:
    if spec["kind"] == "interval":
        return GroundSpace.interval(spec.get("a", 0.0), spec.get("b", 1.0), spec.get("cells", 1024))
    return GroundSpace.finite(spec["states"])


def build_measure(space: GroundSpace, spec: dict | None) -> GridMeasure:
    spec = spec or {"kind": "lebesgue" if space.is_interval else "counting"}
    kind = spec["kind"]
    if kind == "lebesgue":
        return GridMeasure.lebesgue(space)
    if kind == "counting":
        return GridMeasure.counting(space)
    if kind == "density":
        vals = spec.get("density_values")
        if vals is None or len(vals) != space.cell_count:
            raise ConfigError("config.measure.density_values: need one value per cell")
        return GridMeasure.from_density(space, vals)
    return GridMeasure.gaussian(space, spec.get("mean", 0.0), spec.get("sigma", 1.0),
                                spec.get("truncate", 5.5))


def space_and_measure(cfg: dict, default=None):
    sp = cfg.get("space", default)
    if sp is None:
        raise ConfigError("config.space: required for this experiment")
    space = build_space(sp)
    return space, build_measure(space, cfg.get("measure"))


def build_sets(space, specs):
    return sets_from_spec(space, specs)


_NAMED = {
    "const": lambda s: np.ones_like(s),
    "identity": lambda s: s,
    "square": lambda s: s * s,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "gauss": lambda s: np.exp(-0.5 * s * s),
}


def build_function(spec: dict, s: np.ndarray) -> np.ndarray:
    """Grid function ``amp * g(scale * (s - center))`` from a config entry."""
    if "values" in spec:
        v = np.asarray(spec["values"], dtype=float)
        if v.shape != s.shape:
            raise ConfigError("function values: need one value per cell")
        return v
    if "poly" in spec:
        return np.polynomial.polynomial.polyval(s, spec["poly"])
    g = _NAMED[spec.get("name", "const")]
    u = spec.get("scale", 1.0) * (s - spec.get("center", 0.0))
    if "width" in spec:
        u = u / spec["width"]
    return spec.get("amp", 1.0) * g(u)


def tolerances(cfg: dict, defaults: dict) -> dict:
    tol = dict(defaults)
    for k, v in cfg.get("tolerances", {}).items():
        if k not in defaults:
            raise ConfigError(f"config.tolerances.{k}: unknown tolerance")
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            raise ConfigError(f"config.tolerances.{k}: must be a nonnegative number")
        tol[k] = float(v)
    return tol
