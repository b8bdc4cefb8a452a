"""Writers and schemas for the files produced by ``symfrechet run``.

CSV floats use 17 significant digits (``%.17g``) and JSON floats use Python's
shortest round-trip repr, so every number reads back bit-exactly.  Nothing
time-dependent goes into ``trials.csv``, ``plot.csv`` or ``summary.json``;
wall-clock data lives only in ``manifest.json``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

TRIAL_COLUMNS = (
    "scenario",
    "space",
    "n",
    "replication",
    "distance",
    "mismatch",
    "mean_sq_radius",
    "converged",
    "gradient_norm",
    "distance_lower",
    "distance_upper",
)
PLOT_COLUMNS = ("n", "statistic", "value", "lower", "upper")

_NUM = {"type": "number"}
_EXC = {
    "type": "object",
    "required": ["epsilon", "probability", "lower", "upper", "standard_error"],
    "properties": {k: _NUM for k in ("epsilon", "probability", "lower", "upper", "standard_error")},
}
SUMMARY_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scenario", "rows", "checks", "notes", "modulation", "passed"],
    "properties": {
        "scenario": {"type": "string"},
        "passed": {"type": "boolean"},
        "checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "notes": {"type": "array", "items": {"type": "string"}},
        "modulation": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["space", "n", "m_hat", "standard_error", "replications"],
                "properties": {"m_hat": {"type": "number", "minimum": 0},
                               "standard_error": {"type": "number", "minimum": 0}},
            },
        },
        "rows": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["space", "n", "replications", "median", "q90", "exceedance",
                             "mismatch_frequency", "unresolved", "nonconverged", "analytic"],
                "properties": {
                    "n": {"type": "integer", "minimum": 1},
                    "median": {"type": "number", "minimum": 0},
                    "q90": {"type": "number", "minimum": 0},
                    "exceedance": {"type": "array", "items": _EXC},
                    "analytic": {"type": "object", "additionalProperties": _NUM},
                },
            },
        },
    },
}
MANIFEST_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config_hash", "seed", "artifact_version", "scenario", "outputs", "started", "finished", "jobs"],
    "properties": {
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer", "minimum": 0},
        "artifact_version": {"type": "string"},
        "scenario": {"type": "string"},
        "jobs": {"type": "integer", "minimum": 1},
        "outputs": {
            "type": "object",
            "required": ["trials", "summary", "plot", "config", "manifest"],
            "additionalProperties": {"type": "string"},
        },
        "started": {"type": "string"},
        "finished": {"type": "string"},
        "wall_seconds": {"type": "number", "minimum": 0},
    },
}


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def to_csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
