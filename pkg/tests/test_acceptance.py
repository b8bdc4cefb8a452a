"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Experiment criteria drive the real CLI on the bundled configs and read back
``summary.json``; suite criteria reuse the cached invariant suites.
"""

import json
import math
import os
import time

import pytest
from scipy.integrate import quad

from symfrechet import cli
from symfrechet import experiments as ex

from conftest import CONFIG_DIR, SUITE_SECONDS, suite_results


def verdict(capsys, num, title, checks, seconds, limit, extra=""):
    ok = all(checks.values()) and seconds < limit
    line = f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title} ({seconds:.1f} s, limit {limit} s)"
    with capsys.disabled():
        print("\n" + line + (f"  {extra}" if extra else ""))
    failed = [k for k, v in checks.items() if not v]
    assert ok, failed or [f"runtime {seconds:.1f} s over {limit} s"]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Run bundled configs through ``cli.main`` once per (config, jobs)."""
    base = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(name, jobs=1):
        if (name, jobs) not in cache:
            out = base / f"{name}-j{jobs}"
            t0 = time.perf_counter()
            code = cli.main(["run", "--config", os.path.join(CONFIG_DIR, name + ".json"), "--out", str(out),
                             "--jobs", str(jobs)])
            seconds = time.perf_counter() - t0
            assert code == 0
            with open(out / "summary.json") as fh:
                cache[name, jobs] = (json.load(fh), out, seconds)
        return cache[name, jobs]

    return get


def suite(name, prefixes):
    res = suite_results(name)
    picked = [r for r in res if r.name.split("[")[0] in prefixes]
    return picked, SUITE_SECONDS[name, 0]


def exceedance(row, eps):
    return next(e for e in row["exceedance"] if math.isclose(e["epsilon"], eps))


FAMILIES = ("euclidean(1;", "euclidean(2;", "euclidean(5;", "hyperboloid(2)", "hyperboloid(5)", "spd(2)", "spd(3)",
            "product(")


def covers_families(results):
    tags = {r.qualified.split("[", 1)[1] for r in results if "[" in r.qualified}
    return all(any(t.startswith(f) for t in tags) for f in FAMILIES)


def test_criterion_1_geometry_conformance(capsys):
    picked, secs = suite("geometry", {
        "log_exp_round_trip", "exp_log_round_trip", "log_norm_is_distance", "exp_moves_by_norm", "metric_symmetry",
        "triangle_inequality", "identity_of_indiscernibles", "zero_vector_exp", "constraints_after_chain"})
    checks = {r.qualified: r.passed for r in picked}
    checks["all families covered"] = covers_families(picked)
    verdict(capsys, 1, f"geometry conformance, {len(picked)} invariants", checks, secs, 60)


def test_criterion_2_shrinkage_suite(capsys):
    picked, secs = suite("frechet", {"shrinkage", "shrinkage_equality_flat", "shrinkage_equality_collinear",
                                     "shrinkage_strict_fraction"})
    checks = {r.qualified: r.passed for r in picked}
    checks["all families covered"] = covers_families(picked)
    strict = [r.detail for r in picked if r.name.startswith("shrinkage_strict_fraction")]
    verdict(capsys, 2, f"shrinkage inequality, {len(picked)} invariants", checks, secs, 120,
            "min " + min(strict))


def test_criterion_3_displacement(capsys):
    picked, secs = suite("symmetry", {"displacement"})
    checks = {r.qualified: r.passed for r in picked}
    checks["all families covered"] = covers_families(picked)
    verdict(capsys, 3, f"transvection displacement, {len(picked)} invariants", checks, secs, 60)


def test_criterion_4_modulation(capsys, runs):
    summary, _, secs = runs("modulation")
    mods = {(m["space"], m["n"]): m for m in summary["modulation"]}
    checks = {}
    for n in (10, 100):
        m = mods["euclidean(2)", n]
        checks[f"euclidean n={n}"] = abs(m["m_hat"] - 1.0) <= 3 * m["standard_error"]
    for tag in ("hyperboloid(2)", "spd(2)"):
        m = mods[tag, 100]
        checks[f"{tag} n=100 below 1"] = m["m_hat"] + 3 * m["standard_error"] < 1.0
        checks[f"{tag} replications"] = m["replications"] == 2000
    extra = ", ".join(f"{t}: {mods[t, 100]['m_hat']:.3f}" for t in ("euclidean(2)", "hyperboloid(2)", "spd(2)"))
    verdict(capsys, 4, "variance modulation", checks, secs, 300, extra)


def test_criterion_5_heavy_tail_hyperboloid(capsys, runs):
    summary, _, secs = runs("theorem_ii_hyperboloid2")
    rows = summary["rows"]
    probs = [exceedance(r, 0.5)["probability"] for r in rows]
    threshold = ex.pilot_threshold("theorem_ii_heavy_tail", "hyperboloid(2)", 0.5)
    checks = {
        "grid": [r["n"] for r in rows] == [100, 1000, 10000],
        "decreasing": ex.decreasing(probs),
        "threshold committed": threshold is not None,
        "below threshold": threshold is not None and probs[-1] < threshold,
        "no unresolved trials": all(r["unresolved"] == 0 for r in rows),
        "tail functional e/log n": all(
            math.isclose(r["analytic"]["tail_functional"], math.e / math.log(r["n"]), rel_tol=1e-12) for r in rows),
    }
    verdict(capsys, 5, "heavy-tail convergence on H2", checks, secs, 600,
            f"P(d>0.5) = {probs}, threshold {threshold:.4f}")


def test_criterion_6_nonidentical_spd(capsys, runs):
    summary, _, secs = runs("theorem_i_spd2")
    rows = summary["rows"]
    r100 = next(r for r in rows if r["n"] == 100)
    # independent routes: the integral comparison and the Chernoff chain at n = 100, m = 3, alpha = 1/2
    second = 3 * quad(lambda t: t**0.5, 0, 101)[0] / 100**2
    sum_p = 2**1.5 * 100 * math.exp(-25.0)
    probs = [exceedance(r, 0.5)["probability"] for r in rows]
    checks = {
        "second moment bound": math.isclose(r100["analytic"]["second_moment_bound"], second, rel_tol=1e-12),
        "second moment bound frozen": math.isclose(second, 0.20300748754664197, rel_tol=1e-12),
        "sum P bound": math.isclose(r100["analytic"]["sum_p_bound"], sum_p, rel_tol=1e-12),
        "sum P bound near 3.9e-9": round(r100["analytic"]["sum_p_bound"], 10) == 3.9e-9,
        "bounds dominate exact": all(
            r["analytic"]["second_moment_exact"] <= r["analytic"]["second_moment_bound"]
            and r["analytic"]["sum_p_exact"] <= r["analytic"]["sum_p_bound"] for r in rows),
        "decreasing": ex.decreasing(probs),
    }
    verdict(capsys, 6, "non-identical SPD(2) draws, alpha 0.5", checks, secs, 600,
            f"bounds {r100['analytic']['second_moment_bound']:.5f} and {r100['analytic']['sum_p_bound']:.3e}; "
            f"P(d>0.5) = {probs}")


def test_criterion_7_converse(capsys, runs):
    floor = (1 - math.exp(-1)) / 2
    checks, secs, seen = {}, 0.0, []
    for name in ("converse_identity", "converse_gram"):
        summary, out, s = runs(name)
        secs += s
        rows = summary["rows"]
        checks[f"{name} grid"] = [(r["n"], r["replications"]) for r in rows] == [(100, 2000), (1000, 500),
                                                                                  (10000, 200)]
        for r in rows:
            p = exceedance(r, 1.0)["probability"]
            seen.append(p)
            checks[f"{name} n={r['n']} >= 0.25"] = p >= 0.25
            checks[f"{name} n={r['n']} floor emitted"] = math.isclose(r["analytic"]["floor"], floor, rel_tol=1e-12)
        with open(out / "plot.csv") as fh:
            checks[f"{name} floor in plot.csv"] = sum(",floor," in line for line in fh) == 3
    checks["floor 0.31606"] = round(floor, 5) == 0.31606
    verdict(capsys, 7, "converse, symmetric Pareto(1) in R2", checks, secs, 300,
            f"floor {floor:.5f}, min P = {min(seen):.3f}")


def test_criterion_8_scalar_suite(capsys):
    picked, secs = suite("sampling", {"moment_identity", "sign_at_least_half", "sign_symmetry_two_sided",
                                      "chernoff_dominates"})
    checks = {r.qualified: r.passed for r in picked}
    checks["three laws"] = sum(r.name.startswith("moment_identity") for r in picked) == 3
    checks["four df values"] = sum(r.name.startswith("chernoff_dominates") for r in picked) == 4
    verdict(capsys, 8, f"scalar identities, {len(picked)} invariants", checks, secs, 60)


def test_criterion_9_determinism(capsys, runs):
    _, one, s1 = runs("theorem_ii_hyperboloid2", 1)
    _, eight, s8 = runs("theorem_ii_hyperboloid2", 8)
    with open(one / "trials.csv", "rb") as a, open(eight / "trials.csv", "rb") as b:
        same = a.read() == b.read()
    verdict(capsys, 9, "byte-identical trials.csv, jobs 1 vs 8", {"identical": same}, s1 + s8, 120)
