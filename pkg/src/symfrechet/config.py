"""Experiment configuration: JSON schema, default resolution and object builders.

A config is a single JSON document.  ``scenario`` and ``seed`` have no
defaults; every numeric default lives in :data:`SCHEMA` and is filled in by
:func:`resolve`.  Distances and radii are in geodesic distance units of the
configured space; ``sigma`` and ``scale`` share those units.
"""

from __future__ import annotations

import copy
import hashlib
import json
from typing import Any

import jsonschema

from .errors import ConfigError
from .frechet import SolverConfig
from .manifolds import SPD, Euclidean, Hyperboloid, Manifold, Point, Product
from .sampling import GaussianLaw, RadialLaw, SymmetricSampler

SCENARIOS = (
    "theorem_i_nonidentical",
    "theorem_ii_heavy_tail",
    "corollary_first_moment",
    "modulation",
    "converse_pareto",
)
SPACE_FAMILIES = ("euclidean", "hyperboloid", "spd", "product")
SAMPLER_KINDS = ("gaussian", "growing_gaussian", "chi", "loglog_tail", "pareto", "student_radius")

_SPACE = {
    "type": "object",
    "description": "A space. Euclidean spaces may carry a Gram matrix (default identity).",
    "properties": {
        "family": {"enum": list(SPACE_FAMILIES)},
        "k": {"type": "integer", "minimum": 1, "description": "intrinsic dimension parameter"},
        "gram": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "factors": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/space"}},
    },
    "required": ["family"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"family": {"const": "product"}}}, "then": {"required": ["factors"]},
         "else": {"required": ["k"]}},
    ],
}

_SAMPLER = {
    "type": "object",
    "description": (
        "Tangent law at the center (the space's origin). gaussian: isotropic with standard deviation "
        "sigma per orthonormal coordinate. growing_gaussian: draw i has covariance i^alpha I. "
        "Radial kinds draw a radius from the named law (times scale) and a uniform direction."
    ),
    "properties": {
        "kind": {"enum": list(SAMPLER_KINDS)},
        "sigma": {"type": "number", "minimum": 0, "default": 1.0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "df": {"type": "number", "exclusiveMinimum": 0},
        "index": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SOLVER = {
    "type": "object",
    "properties": {
        "gradient_tolerance": {"type": "number", "exclusiveMinimum": 0, "default": 1e-9,
                               "description": "bound on the averaged gradient norm"},
        "max_iterations": {"type": "integer", "minimum": 1, "default": 200},
        "step_size": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "default": 1.0},
        "method": {"enum": ["newton", "karcher"], "default": "newton"},
    },
    "additionalProperties": False,
    "default": {},
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "symfrechet experiment config",
    "type": "object",
    "$defs": {"space": _SPACE, "sampler": _SAMPLER},
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "space": {
            "description": "one space, or a list of spaces (modulation only, one table row block per space)",
            "oneOf": [{"$ref": "#/$defs/space"}, {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/space"}}],
        },
        "sampler": {"$ref": "#/$defs/sampler"},
        "sample_sizes": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1},
                         "default": [100, 1000, 10000]},
        "replications": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 30},
                         "default": [2000, 500, 200]},
        "epsilons": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0},
                     "default": [0.25, 0.5, 1.0]},
        "pass_epsilon": {"type": "number", "exclusiveMinimum": 0, "default": 0.5,
                         "description": "exceedance level used for pass/fail"},
        "threshold": {"type": ["number", "null"], "minimum": 0, "maximum": 1, "default": None,
                      "description": "exceedance threshold at the largest n; null means the committed pilot value"},
        "solver": _SOLVER,
    },
    "required": ["scenario", "seed", "space", "sampler"],
    "additionalProperties": False,
}

_TOP_DEFAULTS = ("sample_sizes", "replications", "epsilons", "pass_epsilon", "threshold")


def _fill_sampler(s: dict) -> dict:
    s = dict(s)
    if s["kind"] == "gaussian":
        s.setdefault("sigma", _SAMPLER["properties"]["sigma"]["default"])
    elif s["kind"] != "growing_gaussian":
        s.setdefault("scale", _SAMPLER["properties"]["scale"]["default"])
    return s


def resolve(raw: dict, seed: int | None = None) -> dict:
    """Validate ``raw`` against :data:`SCHEMA` and fill schema defaults.

    ``seed``, when given, replaces the config's seed.  Raises ConfigError on
    any violation, including the cross-field rules the schema cannot state.
    """
    cfg = copy.deepcopy(raw)
    if seed is not None:
        cfg["seed"] = seed
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}") from None
    for key in _TOP_DEFAULTS:
        cfg.setdefault(key, copy.deepcopy(SCHEMA["properties"][key]["default"]))
    solver = dict(cfg.get("solver", {}))
    for key, prop in _SOLVER["properties"].items():
        solver.setdefault(key, prop["default"])
    cfg["solver"] = solver
    cfg["sampler"] = _fill_sampler(cfg["sampler"])
    cfg["epsilons"] = sorted(float(e) for e in cfg["epsilons"])

    sizes, reps = cfg["sample_sizes"], cfg["replications"]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sample_sizes must be strictly increasing")
    if len(reps) == 1:
        cfg["replications"] = reps * len(sizes)
    elif len(reps) != len(sizes):
        raise ConfigError("replications must have one entry, or one per sample size")
    _check_scenario(cfg)
    return cfg


def _check_scenario(cfg: dict) -> None:
    scen, smp = cfg["scenario"], cfg["sampler"]
    spaces = cfg["space"] if isinstance(cfg["space"], list) else [cfg["space"]]
    if isinstance(cfg["space"], list) and scen != "modulation":
        raise ConfigError("a list of spaces is only allowed for the modulation scenario")
    for sp in spaces:
        build_space(sp)
    need = {"chi": "df", "pareto": "index", "student_radius": "df", "growing_gaussian": "alpha"}
    if smp["kind"] in need and need[smp["kind"]] not in smp:
        raise ConfigError(f"sampler kind {smp['kind']} needs {need[smp['kind']]!r}")
    if smp["kind"] == "chi" and smp["df"] < 1:
        raise ConfigError("chi sampler needs df >= 1")
    if scen == "theorem_i_nonidentical":
        if spaces[0]["family"] != "spd":
            raise ConfigError("theorem_i_nonidentical runs on an SPD space")
        if smp["kind"] != "growing_gaussian":
            raise ConfigError("theorem_i_nonidentical needs the growing_gaussian sampler")
    elif smp["kind"] == "growing_gaussian":
        raise ConfigError("growing_gaussian is only used by theorem_i_nonidentical")
    if scen == "converse_pareto":
        if spaces[0]["family"] != "euclidean":
            raise ConfigError("converse_pareto is stated for Euclidean spaces only")
        if smp["kind"] != "pareto":
            raise ConfigError("converse_pareto needs the pareto sampler")
    if scen == "theorem_ii_heavy_tail" and smp["kind"] == "gaussian":
        raise ConfigError("theorem_ii_heavy_tail needs a radial sampler")


def canonical_json(obj: Any) -> str:
    """Key-sorted compact JSON; the hashing and ``config.resolved`` form."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()


def load(path: str, seed: int | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve(raw, seed)


# ---------------------------------------------------------------------------
def build_space(desc: dict) -> Manifold:
    fam = desc["family"]
    if fam == "product":
        return Product([build_space(f) for f in desc["factors"]])
    k = int(desc["k"])
    if "gram" in desc and fam != "euclidean":
        raise ConfigError("only Euclidean spaces take a Gram matrix")
    try:
        if fam == "euclidean":
            return Euclidean(k, desc.get("gram"))
        if fam == "hyperboloid":
            return Hyperboloid(k)
        return SPD(k)
    except ValueError as e:
        raise ConfigError(f"bad space {desc}: {e}") from None


def build_sampler(space: Manifold, desc: dict) -> SymmetricSampler:
    """Sampler centered at the space's origin.  Not defined for growing_gaussian."""
    center = Point(space.tag, space.origin())
    kind = desc["kind"]
    if kind == "gaussian":
        law = GaussianLaw.isotropic(space.dim, float(desc["sigma"]))
    elif kind == "growing_gaussian":
        raise ConfigError("growing_gaussian draws are not identically distributed")
    else:
        law = RadialLaw(kind, df=desc.get("df"), index=desc.get("index"), scale=float(desc.get("scale", 1.0)))
    return SymmetricSampler(space, center, law)


def build_solver(desc: dict) -> SolverConfig:
    return SolverConfig(
        gradient_tolerance=float(desc["gradient_tolerance"]),
        max_iterations=int(desc["max_iterations"]),
        step_size=float(desc["step_size"]),
        method=desc["method"],
    )


def spaces_of(cfg: dict) -> list[dict]:
    return cfg["space"] if isinstance(cfg["space"], list) else [cfg["space"]]
