"""Seeded invariant suites behind ``symfrechet check``.

Every invariant reduces to a nonnegative *violation* compared against a
tolerance; it passes when ``violation <= tolerance``.

Failure injection: setting ``SYMFRECHET_INJECT_FAILURE`` to a comma-separated
list of invariant names (``suite.name``, or ``*`` for all) replaces those
tolerances by -1, so the named invariants fail deterministically.  The test
suite uses this to exercise the failure path of the CLI.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats as sps

from .errors import DomainError
from .frechet import SolverConfig, frechet_mean_array, shrinkage_from_arrays
from .manifolds import SPD, Euclidean, Hyperboloid, Manifold, Point, Product, minkowski, unvec, vec
from .rng import stream
from .sampling import (
    GaussianLaw,
    RadialLaw,
    SymmetricSampler,
    TruncationScheme,
    chernoff_chisq_bound,
    loglog_survival,
    loglog_tail_quantile,
    moment_via_tail,
    truncate,
)
from .symmetry import Transvection, displacement_bound_check

INJECT_ENV = "SYMFRECHET_INJECT_FAILURE"
SUITES = ("geometry", "symmetry", "frechet", "sampling")


@dataclass
class InvariantResult:
    suite: str
    name: str
    violation: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.violation <= self.tolerance)

    @property
    def qualified(self) -> str:
        return f"{self.suite}.{self.name}"


def _injected() -> set[str]:
    raw = os.environ.get(INJECT_ENV, "")
    return {s.strip() for s in raw.split(",") if s.strip()}


class _Recorder:
    def __init__(self, suite: str):
        self.suite = suite
        self.results: list[InvariantResult] = []
        self._inject = _injected()

    def add(self, name: str, violation: float, tolerance: float, detail: str = "") -> None:
        q = f"{self.suite}.{name}"
        if "*" in self._inject or q in self._inject:
            tolerance = -1.0
        v = float(violation)
        if not math.isfinite(v):
            v = math.inf
        self.results.append(InvariantResult(self.suite, name, v, tolerance, detail))


def conformance_spaces(rng: np.random.Generator) -> list[Manifold]:
    """The space families covered by the suites; Euclidean Gram matrices are random."""
    out: list[Manifold] = []
    for k in (1, 2, 5):
        a = rng.standard_normal((k, k))
        out.append(Euclidean(k, a @ a.T + 0.5 * np.eye(k)))
    out += [Hyperboloid(2), Hyperboloid(5), SPD(2), SPD(3), Product([Hyperboloid(2), SPD(2), Euclidean(1)])]
    return out


def _constraint_violation(space: Manifold, x: np.ndarray) -> float:
    if isinstance(space, Hyperboloid):
        scale = np.maximum(1.0, x[..., 0] ** 2)
        bad = np.abs(minkowski(x, x) + 1.0) / scale
        return float(np.max(np.where(x[..., 0] > 0, bad, np.inf)))
    if isinstance(space, SPD):
        asym = np.max(np.abs(x - np.swapaxes(x, -1, -2)))
        pos = np.min(np.linalg.eigvalsh(x))
        return float(asym if pos > 0 else np.inf)
    if isinstance(space, Product):
        return max(_constraint_violation(f, p) for f, p in zip(space.factors, space.split(x)))
    return 0.0 if np.all(np.isfinite(x)) else math.inf


# ---------------------------------------------------------------------------
def geometry_suite(seed: int, cases: int = 1000) -> list[InvariantResult]:
    rec = _Recorder("geometry")
    rng = stream(seed, 1)
    for space in conformance_spaces(rng):
        t = space.tag
        b = space.random_point(rng, (cases,))
        y = space.random_point(rng, (cases,))
        z = space.random_point(rng, (cases,))
        v = space.random_tangent(rng, b)
        nv = space.norm(b, v)
        rt = space.norm(b, space.log(b, space.exp(b, v)) - v) / (1.0 + nv)
        rec.add(f"log_exp_round_trip[{t}]", np.max(rt), 1e-8)
        lg = space.log(b, y)
        dby = space.dist(b, y)
        rec.add(f"exp_log_round_trip[{t}]", np.max(np.abs(space.dist(b, space.exp(b, lg)) - dby)), 1e-8)
        rec.add(f"log_norm_is_distance[{t}]", np.max(np.abs(space.norm(b, lg) - dby)), 1e-8)
        rec.add(f"exp_moves_by_norm[{t}]", np.max(np.abs(space.dist(b, space.exp(b, v)) - nv)), 1e-8)
        rec.add(f"metric_symmetry[{t}]", np.max(np.abs(dby - space.dist(y, b))), 1e-10)
        tri = space.dist(b, z) - dby - space.dist(y, z)
        rec.add(f"triangle_inequality[{t}]", max(0.0, float(np.max(tri))), 1e-10)
        rec.add(f"identity_of_indiscernibles[{t}]", np.max(space.dist(b, b)), 1e-10)
        rec.add(f"zero_vector_exp[{t}]", np.max(space.dist(b, space.exp(b, 0.0 * v))), 1e-12)

        # 100 chained exp/log calls: each pair moves halfway to a fresh random
        # point, so the chain stays in a bounded region
        x = space.random_point(rng, (20,))
        for _ in range(50):
            w = space.random_point(rng, (20,), 2.0)
            x = space.exp(x, 0.5 * space.log(x, w))
        tol = 1e-9 if isinstance(space, (Hyperboloid, Product)) else 1e-12
        rec.add(f"constraints_after_chain[{t}]", _constraint_violation(space, x), tol)

        # second difference of f(s) = d^2(gamma(s), y) along unit-speed geodesics
        m = min(cases, 200)
        u = space.random_tangent(rng, b[:m])
        u = u / space.norm(b[:m], u).reshape((m,) + (1,) * len(space.point_shape))
        s = rng.uniform(0.0, 1.0, m).reshape((m,) + (1,) * len(space.point_shape))
        h = 1e-3

        def f(ss):
            return space.dist(space.exp(b[:m], ss * u), y[:m]) ** 2

        sd = (f(s + h) - 2 * f(s) + f(s - h)) / h**2
        if isinstance(space, Euclidean):
            rec.add(f"geodesic_convexity_flat[{t}]", np.max(np.abs(sd - 2.0)), 1e-6)
        else:
            rec.add(f"geodesic_convexity[{t}]", max(0.0, float(np.max(2.0 - sd))), 1e-4)
    return rec.results


# ---------------------------------------------------------------------------
def symmetry_suite(seed: int, cases: int = 200, m_max: int = 10) -> list[InvariantResult]:
    rec = _Recorder("symmetry")
    rng = stream(seed, 2)
    for space in conformance_spaces(rng):
        t = space.tag
        c = space.random_point(rng)
        x = space.random_point(rng, (cases,))
        y = space.random_point(rng, (cases,))
        sx, sy = space.symmetry(c, x), space.symmetry(c, y)
        rec.add(f"isometry[{t}]", np.max(np.abs(space.dist(sx, sy) - space.dist(x, y))), 1e-8)
        rec.add(f"involution[{t}]", np.max(space.dist(space.symmetry(c, sx), x)), 1e-8)
        rec.add(f"center_fixed[{t}]", float(space.dist(space.symmetry(c, c), c)), 1e-10)
        rec.add(f"radius_preserved[{t}]", np.max(np.abs(space.dist(c, sx) - space.dist(c, x))), 1e-8)

        # transvection between two centers at distance in [0.1, 0.5]
        mu1 = space.random_point(rng)
        d = rng.uniform(0.1, 0.5)
        w = space.random_tangent(rng, mu1)
        mu2 = space.exp(mu1, d * w / space.norm(mu1, w))
        p1, p2 = Point(space.tag, mu1), Point(space.tag, mu2)
        for order in ("s2_s1", "s1_s2"):
            T = Transvection(space, p1, p2, order)
            tx, ty = T.apply_array(x), T.apply_array(y)
            rec.add(f"transvection_isometry[{t},{order}]",
                    np.max(np.abs(space.dist(tx, ty) - space.dist(x, y))), 1e-8)
            rep = displacement_bound_check(space, p1, p2, x, m_max, order, tol=np.inf)
            worst = max(max(0.0, r.bound - r.min_displacement) for r in rep.rows)
            rec.add(f"displacement[{t},{order}]", worst, 1e-6, f"length={rep.length:.4f}")
    return rec.results


# ---------------------------------------------------------------------------
def _collinear(space: Manifold, rng: np.random.Generator, base: np.ndarray, size: int) -> np.ndarray:
    u = space.random_tangent(rng, base)
    ts = rng.uniform(-2.0, 2.0, size).reshape((size,) + (1,) * len(space.point_shape))
    return space.exp(base, ts * u)


def frechet_suite(seed: int, cases: int = 1000, points: int = 5) -> list[InvariantResult]:
    rec = _Recorder("frechet")
    rng = stream(seed, 3)
    cfg = SolverConfig(gradient_tolerance=1e-12, max_iterations=2000)
    for space in conformance_spaces(rng):
        t = space.tag
        flat = isinstance(space, Euclidean)
        worst_hold = worst_eq = worst_col = worst_opt = worst_eqv = worst_perm = 0.0
        strict = nonconv = 0
        for _ in range(cases):
            xs = space.random_point(rng, (points,))
            base = space.random_point(rng)
            mu, g, _, ok, _ = frechet_mean_array(space, xs, cfg)
            nonconv += not ok
            r = shrinkage_from_arrays(space, base, xs, mu)
            worst_hold = max(worst_hold, r.lhs - r.rhs)
            if flat:
                worst_eq = max(worst_eq, abs(r.lhs - r.rhs))
            else:
                strict += r.rhs - r.lhs > 1e-6
            worst_opt = max(worst_opt, float(space.norm(mu, space.log(mu, xs).mean(axis=0))))
        for _ in range(max(1, cases // 10)):
            base = space.random_point(rng)
            xs = _collinear(space, rng, base, points)
            mu, *_ = frechet_mean_array(space, xs, cfg)
            r = shrinkage_from_arrays(space, base, xs, mu)
            worst_col = max(worst_col, abs(r.lhs - r.rhs))

            # scale 0.5 keeps the reflected sample where hyperboloid coordinates
            # still resolve 1e-7 (round-off there grows like e^{2r})
            xs = space.random_point(rng, (points,), 0.5)
            c = space.random_point(rng, (), 0.5)
            mu, *_ = frechet_mean_array(space, xs, cfg)
            mus, *_ = frechet_mean_array(space, space.symmetry(c, xs), cfg)
            worst_eqv = max(worst_eqv, float(space.dist(mus, space.symmetry(c, mu))))
            perm = rng.permutation(points)
            mup, *_ = frechet_mean_array(space, xs[perm], cfg)
            worst_perm = max(worst_perm, float(space.dist(mu, mup)))
        rec.add(f"converged[{t}]", nonconv, 0)
        rec.add(f"first_order_optimality[{t}]", worst_opt, 1e-12)
        rec.add(f"shrinkage[{t}]", max(0.0, worst_hold), 1e-8)
        if flat:
            rec.add(f"shrinkage_equality_flat[{t}]", worst_eq, 1e-6)
        else:
            frac = strict / cases
            rec.add(f"shrinkage_strict_fraction[{t}]", max(0.0, 0.95 - frac), 0.0, f"strict={frac:.4f}")
        rec.add(f"shrinkage_equality_collinear[{t}]", worst_col, 1e-6)
        rec.add(f"symmetry_equivariance[{t}]", worst_eqv, 1e-7)
        rec.add(f"permutation_invariance[{t}]", worst_perm, 1e-10)

    # closed-form means
    e3 = Euclidean(3)
    xs = stream(seed, 3, 1).standard_normal((7, 3))
    mu, *_ = frechet_mean_array(e3, xs)
    rec.add("euclidean_arithmetic_mean", float(np.max(np.abs(mu - xs.mean(axis=0)))), 1e-9)
    s3 = SPD(3)
    a = s3.random_point(stream(seed, 3, 2))
    mu, *_ = frechet_mean_array(s3, np.stack([a, np.linalg.inv(a)]))
    rec.add("spd_inverse_pair_mean", float(s3.dist(mu, np.eye(3))), 1e-7)
    mu, g, it, ok, _ = frechet_mean_array(s3, a[None])
    rec.add("single_point_mean", float(s3.dist(mu, a)), 1e-12)
    rec.add("single_point_iterations", it, 0)
    return rec.results


# ---------------------------------------------------------------------------
def sampling_suite(seed: int, cases: int = 1000) -> list[InvariantResult]:
    rec = _Recorder("sampling")
    rng = stream(seed, 4)
    laws = {
        "gaussian": GaussianLaw.isotropic,
        "loglog_tail": lambda dim, _: RadialLaw("loglog_tail"),
        "pareto": lambda dim, _: RadialLaw("pareto", index=1.0),
        "student_radius": lambda dim, _: RadialLaw("student_radius", df=1.5),
    }
    n = 20_000
    combos = []
    for space in (Hyperboloid(2), SPD(2), Euclidean(2)):
        center = Point(space.tag, space.random_point(rng))
        for name, make in laws.items():
            smp = SymmetricSampler(space, center, make(space.dim, 1.0))
            combos.append((f"{space.tag},{name}", smp))
            tail = smp.tail_function
            if tail is not None:
                grid = np.linspace(0.0, 50.0, 1000)
                rec.add(f"tail_monotone[{space.tag},{name}]", max(0.0, float(np.max(np.diff(tail(grid))))), 0.0)
    # 20 random projections, cycling through the samplers with fresh draws each
    se = math.sqrt(0.25 / n)
    worst_two = worst_one = 0.0
    for j in range(20):
        label, smp = combos[j % len(combos)]
        d = rng.standard_normal(smp.space.dim)
        freq = float(np.mean(smp.sample_coords(rng, n) @ (d / np.linalg.norm(d)) >= 0))
        worst_two = max(worst_two, abs(freq - 0.5) - 3 * se)
        worst_one = max(worst_one, 0.5 - 3 * se - freq)
    rec.add("sign_symmetry_two_sided", max(0.0, worst_two), 0.0)
    rec.add("sign_at_least_half", max(0.0, worst_one), 0.0)

    for space in (Hyperboloid(2), SPD(2), Euclidean(2)):
        center = Point(space.tag, space.random_point(rng))
        # truncation at level 1 around the center
        sch = TruncationScheme(1.0, center)
        xs = space.exp(center.coords, space.random_tangent(rng, np.broadcast_to(center.coords, (50,) + space.point_shape), 1.0))
        worst = 0.0
        for x in xs:
            p = truncate(sch, space, Point(space.tag, x))
            pp = truncate(sch, space, p)
            worst = max(worst, float(space.dist(p.coords, pp.coords)), float(space.dist(center.coords, p.coords)) - 1.0)
        rec.add(f"truncation_idempotent[{space.tag}]", max(0.0, worst), 1e-12)

    for m in (1, 3, 6, 10):
        x = np.linspace(0.1, 60.0, 100)
        gap = sps.chi2.sf(x, m) - np.array([chernoff_chisq_bound(m, xi) for xi in x])
        rec.add(f"chernoff_dominates[m={m}]", max(0.0, float(np.max(gap))), 0.0)

    u = 1.0 - rng.random(cases)
    rec.add("loglog_quantile_inversion", float(np.max(np.abs(loglog_survival(loglog_tail_quantile(u)) - u))), 1e-10)

    closed = [
        ("uniform_p2", lambda t: np.clip(1.0 - np.asarray(t, dtype=float), 0.0, 1.0), 2.0, 1.0, 1.0 / 3.0),
        ("exponential_p1", lambda t: np.exp(-np.asarray(t, dtype=float)), 1.0, 60.0, 1.0),
        ("chi3_p2", lambda t: sps.chi.sf(t, 3), 2.0, 60.0, 3.0),
    ]
    for name, sf, p, up, exact in closed:
        rec.add(f"moment_identity[{name}]", abs(moment_via_tail(sf, p, up) - exact), 1e-6)

    c = rng.standard_normal((cases, 6))
    rec.add("vec_round_trip", float(np.max(np.abs(vec(unvec(c, 3)) - c))), 1e-14)
    return rec.results


SUITE_FUNCS: dict[str, Callable[[int], list[InvariantResult]]] = {
    "geometry": geometry_suite,
    "symmetry": symmetry_suite,
    "frechet": frechet_suite,
    "sampling": sampling_suite,
}


def run_suite(name: str, seed: int) -> list[InvariantResult]:
    if name == "all":
        return [r for s in SUITES for r in SUITE_FUNCS[s](seed)]
    if name not in SUITE_FUNCS:
        raise DomainError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return SUITE_FUNCS[name](seed)
