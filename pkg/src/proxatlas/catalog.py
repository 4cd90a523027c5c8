"""String ids and JSON files for the built-in operators.

Ids follow the mini-grammar ``name:key=value:...``, for instance
``"soft:λ=1"``, ``"group_lasso:groups=1,1,2,2:λ=1"`` or
``"wglasso:n=3:window=1:λ=1"``.  Group structures are written as one label
per coordinate; ``window=k`` builds sliding neighborhoods of radius ``k`` and
``blocks=b`` disjoint blocks of size ``b``.

Custom weights go through JSON files validated against :data:`OPERATOR_FILE_SCHEMA`.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import SpecError
from .fields import Box, OperatorSpec
from .shrinkage import (
    GroupStructure,
    NeighborhoodSystem,
    ScalarRule,
    SocialShrinkageSpec,
    group_operator,
    scalar_operator,
    social_operator,
)

CATALOG = [
    {"id": "soft", "kind": "scalar", "prox": True, "params": {"λ": 1.0, "n": 1},
     "origin": "soft thresholding, proximity operator of λ|x|"},
    {"id": "hard", "kind": "scalar", "prox": True, "params": {"λ": 1.0, "n": 1},
     "origin": "hard thresholding, proximity operator of the weighted l0 penalty; f(±√(2λ)) = ±√(2λ)"},
    {"id": "scaled_soft", "kind": "scalar", "prox": True, "params": {"C": 2.0, "λ": 1.0, "n": 1},
     "origin": "C times soft thresholding; penalty |x| + (1/C - 1) x²/2, nonconvex for C > 1"},
    {"id": "quantizer", "kind": "scalar", "prox": True, "params": {"q": 4},
     "origin": "quantization-like step map on [x_0, x_q) with nondecreasing levels"},
    {"id": "identity", "kind": "scalar", "prox": True, "params": {"n": 1},
     "origin": "identity, proximity operator of the zero penalty"},
    {"id": "group_lasso", "kind": "group", "prox": True, "params": {"groups": "1,1,2,2", "λ": 1.0},
     "origin": "group-sparsity shrinkage, proximity operator of λ times the mixed l1/l2 norm"},
    {"id": "group_ew", "kind": "group", "prox": True, "params": {"groups": "1,1,2,2", "λ": 1.0},
     "origin": "group empirical Wiener / group non-negative garrote"},
    {"id": "wglasso", "kind": "social", "prox": False, "params": {"n": 3, "window": 1, "λ": 1.0},
     "origin": "windowed group-LASSO social shrinkage y_i (1 - λ/||diag(w^i) y||)_+"},
    {"id": "pew", "kind": "social", "prox": False, "params": {"n": 3, "window": 1, "λ": 1.0},
     "origin": "persistent empirical Wiener social shrinkage y_i (1 - λ²/||diag(w^i) y||²)_+"},
    {"id": "rotation", "kind": "control", "prox": False, "params": {},
     "origin": "planar rotation field (-y_2, y_1); non-conservative control"},
]

CATALOG_IDS = tuple(e["id"] for e in CATALOG)

_ALIASES = {"λ": "lam", "lambda": "lam", "lam": "lam", "c": "scale", "C": "scale", "scale": "scale"}

NEIGHBORHOOD_SCHEMA = {
    "type": "object",
    "required": ["n", "weights"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "weights": {"type": "array", "minItems": 1,
                    "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
    },
}

GROUP_SCHEMA = {
    "type": "object",
    "required": ["n", "groups"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "groups": {"type": "array", "minItems": 1,
                   "items": {"type": "array", "minItems": 1,
                             "items": {"type": "integer", "minimum": 0}}},
    },
}

OPERATOR_FILE_SCHEMA = {
    "type": "object",
    "required": ["operator"],
    "properties": {
        "operator": {"enum": ["wglasso", "pew", "group_lasso", "group_ew"]},
        "lambda": {"type": "number", "minimum": 0},
        "neighborhoods": NEIGHBORHOOD_SCHEMA,
        "groups": GROUP_SCHEMA,
    },
}


def catalog_entry(op_id: str) -> dict:
    for e in CATALOG:
        if e["id"] == op_id:
            return dict(e)
    raise SpecError(f"unknown operator {op_id!r}; known: {', '.join(CATALOG_IDS)}")


def _parse_params(parts):
    out = {}
    for part in parts:
        if "=" not in part:
            raise SpecError(f"malformed parameter {part!r}, expected key=value")
        key, val = part.split("=", 1)
        out[_ALIASES.get(key.strip(), key.strip())] = val.strip()
    return out


def _num(params, key, default):
    try:
        return float(params.pop(key, default))
    except ValueError as exc:
        raise SpecError(f"parameter {key} must be a number") from exc


def _int(params, key, default):
    try:
        return int(params.pop(key, default))
    except ValueError as exc:
        raise SpecError(f"parameter {key} must be an integer") from exc


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise SpecError(f"bad number list {text!r}") from exc


def rotation_operator() -> OperatorSpec:
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    return OperatorSpec(n=2, domain=Box.whole(2), eval=lambda y: np.asarray(y) @ rot.T,
                        jacobian=lambda y: rot.copy(), provenance="rotation", vectorized=True)


def _social_system(params) -> NeighborhoodSystem:
    n = _int(params, "n", 3)
    if "blocks" in params:
        return NeighborhoodSystem.blocks(n, _int(params, "blocks", 1))
    window = _int(params, "window", 1)
    profile = _floats(params.pop("weights")) if "weights" in params else None
    return NeighborhoodSystem.sliding_window(n, window, profile)


def parse_operator_id(text: str) -> OperatorSpec:
    """Build the operator named by a catalog id string.

    >>> parse_operator_id("scaled_soft:C=2")(np.array([3.0]))
    array([4.])
    """
    parts = [p for p in text.strip().split(":") if p]
    if not parts:
        raise SpecError("empty operator id")
    name = parts[0]
    catalog_entry(name)
    params = _parse_params(parts[1:])
    try:
        if name in ("soft", "hard", "identity", "scaled_soft"):
            n = _int(params, "n", 1)
            if name == "soft":
                rule = ScalarRule.soft(_num(params, "lam", 1.0))
            elif name == "hard":
                rule = ScalarRule.hard(_num(params, "lam", 1.0))
            elif name == "identity":
                rule = ScalarRule.identity()
            else:
                rule = ScalarRule.scaled_soft(_num(params, "scale", 2.0), _num(params, "lam", 1.0))
            op = scalar_operator(rule, n, provenance=text)
        elif name == "quantizer":
            if "breaks" in params or "levels" in params:
                rule = ScalarRule.quantizer(_floats(params.pop("breaks", "")),
                                            _floats(params.pop("levels", "")))
            else:
                rule = ScalarRule.uniform_quantizer(_int(params, "q", 4))
            op = scalar_operator(rule, 1, provenance=text)
        elif name in ("group_lasso", "group_ew"):
            labels = str(params.pop("groups", "1,1,2,2")).split(",")
            gs = GroupStructure.from_labels([lab.strip() for lab in labels])
            op = group_operator(gs, _num(params, "lam", 1.0), name, provenance=text)
        elif name in ("wglasso", "pew"):
            lam = _num(params, "lam", 1.0)
            spec = SocialShrinkageSpec(_social_system(params), lam, profile=name)
            op = social_operator(spec, provenance=text)
        else:
            op = rotation_operator()
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"invalid parameters for {name!r}: {exc}") from exc
    if params:
        raise SpecError(f"unknown parameters for {name!r}: {', '.join(sorted(params))}")
    return op


def neighborhood_system_from_json(obj: dict) -> NeighborhoodSystem:
    try:
        jsonschema.validate(obj, NEIGHBORHOOD_SCHEMA)
        ns = NeighborhoodSystem(np.asarray(obj["weights"], dtype=float))
    except (jsonschema.ValidationError, ValueError) as exc:
        raise SpecError(f"invalid neighborhood system: {getattr(exc, 'message', exc)}") from exc
    if ns.n != obj["n"]:
        raise SpecError(f"n={obj['n']} but weights are {ns.n} x {ns.n}")
    return ns


def group_structure_from_json(obj: dict) -> GroupStructure:
    try:
        jsonschema.validate(obj, GROUP_SCHEMA)
        return GroupStructure(obj["n"], tuple(tuple(g) for g in obj["groups"]))
    except (jsonschema.ValidationError, ValueError) as exc:
        raise SpecError(f"invalid group structure: {getattr(exc, 'message', exc)}") from exc


def load_operator_file(path) -> OperatorSpec:
    """Read a JSON operator description with custom weights or groups."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        jsonschema.validate(obj, OPERATOR_FILE_SCHEMA)
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        raise SpecError(f"cannot read operator file {path}: {getattr(exc, 'message', exc)}") from exc
    name = obj["operator"]
    lam = float(obj.get("lambda", 1.0))
    try:
        if name in ("wglasso", "pew"):
            if "neighborhoods" not in obj:
                raise SpecError(f"{name} file needs a 'neighborhoods' object")
            spec = SocialShrinkageSpec(neighborhood_system_from_json(obj["neighborhoods"]), lam, profile=name)
            return social_operator(spec, provenance=str(path))
        if "groups" not in obj:
            raise SpecError(f"{name} file needs a 'groups' object")
        return group_operator(group_structure_from_json(obj["groups"]), lam, name, provenance=str(path))
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from exc


def resolve_operator(text: str) -> OperatorSpec:
    """Catalog id, or path to a JSON operator file."""
    if text.endswith(".json") or Path(text).is_file():
        return load_operator_file(text)
    return parse_operator_id(text)
