"""Command-line entry point.

    symfrechet run --config PATH --out DIR [--seed U64] [--jobs N]
    symfrechet check SUITE [--seed U64]
    symfrechet list [--json]

``SYMFRECHET_SEED`` and ``SYMFRECHET_JOBS`` supply the seed and worker
count when the flags are absent.  Exit codes: 0 success, 1 failed
invariants, 2 bad usage or config, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import os
import sys
import time
import warnings

from . import __version__
from . import config as cfgmod
from . import experiments as ex
from . import invariants as inv
from . import outputs as out
from .errors import ConfigError, PreconditionError

SEED_ENV = "SYMFRECHET_SEED"
JOBS_ENV = "SYMFRECHET_JOBS"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= 2**64 - 1:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _env(name: str, parse):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return parse(raw)
    except (ValueError, argparse.ArgumentTypeError):
        raise ConfigError(f"{name}={raw!r} is not valid") from None


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def cmd_run(args) -> int:
    try:
        seed = args.seed if args.seed is not None else _env(SEED_ENV, _u64)
        jobs = args.jobs if args.jobs is not None else _env(JOBS_ENV, _positive)
        jobs = jobs or os.cpu_count() or 1
        resolved = cfgmod.load(args.config, seed)
    except OSError as e:
        print(f"error: cannot read config {args.config}: {e.strerror or e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    config = ex.ExperimentConfig(resolved)
    started = _now()
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ex.ScenarioWarning)
            records, summary = ex.run(config, jobs)
        for w in caught:
            if issubclass(w.category, ex.ScenarioWarning):
                print(f"warning: {w.message}", file=sys.stderr)
    except (ConfigError, PreconditionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    files = {
        "trials": "trials.csv",
        "summary": "summary.json",
        "plot": "plot.csv",
        "config": "config.resolved",
        "manifest": "manifest.json",
    }
    manifest = {
        "config_hash": cfgmod.config_hash(resolved),
        "seed": config.seed,
        "artifact_version": __version__,
        "scenario": config.scenario,
        "jobs": jobs,
        "outputs": {"directory": os.path.abspath(args.out), **files},
        "started": started,
        "finished": _now(),
        "wall_seconds": time.perf_counter() - t0,
    }
    contents = {
        "trials": out.to_csv(out.TRIAL_COLUMNS, (dataclasses.asdict(r) for r in records)),
        "summary": out.to_json(summary.to_dict()),
        "plot": out.to_csv(out.PLOT_COLUMNS, ex.plot_rows(summary)),
        "config": cfgmod.canonical_json(resolved) + "\n",
        "manifest": out.to_json(manifest),
    }
    try:
        os.makedirs(args.out, exist_ok=True)
        for key, name in files.items():
            with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(contents[key])
    except OSError as e:
        print(f"error: cannot write to {args.out}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO

    status = "passed" if summary.passed else "FAILED"
    print(f"{config.scenario}: {len(records)} trials, checks {status} -> {args.out}")
    for name, ok in summary.checks.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        seed = args.seed if args.seed is not None else _env(SEED_ENV, _u64)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    seed = 0 if seed is None else seed
    results = inv.run_suite(args.suite, seed)
    width = max(len(r.qualified) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.qualified:<{width}}  "
              f"violation={r.violation:.3e}  tol={r.tolerance:.1e}  {r.detail}".rstrip())
    failed = [r for r in results if not r.passed]
    print(f"{args.suite}: {len(results) - len(failed)} passed, {len(failed)} failed (seed {seed})")
    for r in failed:
        print(f"failed: {r.qualified}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def listing() -> dict:
    return {
        "scenarios": list(cfgmod.SCENARIOS),
        "space_families": list(cfgmod.SPACE_FAMILIES),
        "sampler_kinds": list(cfgmod.SAMPLER_KINDS),
        "suites": [*inv.SUITES, "all"],
        "config_schema": cfgmod.SCHEMA,
    }


def cmd_list(args) -> int:
    info = listing()
    if args.json:
        print(json.dumps(info, indent=2))
        return EXIT_OK
    print("scenarios:")
    for s in info["scenarios"]:
        print(f"  {s}")
    print("space families:")
    for s in info["space_families"]:
        props = cfgmod.SCHEMA["$defs"]["space"]["properties"]
        print(f"  {s}  (fields: {', '.join(props)})")
    print("sampler kinds:")
    sprops = cfgmod.SCHEMA["$defs"]["sampler"]["properties"]
    for s in info["sampler_kinds"]:
        print(f"  {s}")
    print("sampler parameters:")
    for k, p in sprops.items():
        if k != "kind":
            print(f"  {k}: {_describe(p)}")
    print("config fields:")
    for k, p in cfgmod.SCHEMA["properties"].items():
        print(f"  {k}: {_describe(p)}")
    print("solver fields:")
    for k, p in cfgmod.SCHEMA["properties"]["solver"]["properties"].items():
        print(f"  {k}: {_describe(p)}")
    return EXIT_OK


def _describe(p: dict) -> str:
    bits = []
    if "enum" in p:
        bits.append("one of " + ", ".join(map(str, p["enum"])))
    elif "type" in p:
        bits.append(p["type"] if isinstance(p["type"], str) else "/".join(p["type"]))
    for key in ("minimum", "exclusiveMinimum", "maximum", "exclusiveMaximum"):
        if key in p:
            bits.append(f"{key}={p[key]}")
    if "default" in p:
        bits.append(f"default={json.dumps(p['default'])}")
    elif "$ref" in p or "oneOf" in p:
        bits.append("see schema")
    if "description" in p:
        bits.append(f"- {p['description']}")
    return " ".join(bits) or "see schema"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symfrechet", description="Fréchet-mean weak-law experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=_u64, default=None, help=f"master seed (env {SEED_ENV})")
    r.add_argument("--jobs", type=_positive, default=None, help=f"worker processes (env {JOBS_ENV})")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="run an invariant suite")
    c.add_argument("suite", choices=[*inv.SUITES, "all"])
    c.add_argument("--seed", type=_u64, default=None, help=f"suite seed (env {SEED_ENV}, default 0)")
    c.set_defaults(func=cmd_check)

    ls = sub.add_parser("list", help="list scenarios, spaces, samplers and the config schema")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
