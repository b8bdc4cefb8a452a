"""Scenario runners for the weak-law experiments.

Each replication draws its sample from its own RNG stream
``stream(seed, scenario, row, n, replication)``, solves for the sample
Fréchet mean and emits one :class:`TrialRecord`.  Replications are farmed
out to a process pool and folded back in replication order, so the records,
and therefore every summary, do not depend on the worker count.

Far-out samples are never materialized: draws stay as tangent vectors at the
center and enter the solver through ``log_of_exp``.  If a mean is itself
too far out to be represented, the solver stops short and its gradient is no
longer trustworthy.  Every record therefore also carries a bracket on the
true distance built from the draws alone: the norm of their average in the
tangent space at the center bounds it from above, and projecting the
first-order condition onto the farthest draw gives
``d >= (r_max - sum of the other radii) / n``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats as sps

from . import config as cfgmod
from .errors import ConfigError, DomainError, PreconditionError
from .frechet import ModulationEstimate, frechet_mean_normal, modulation_ratio
from .manifolds import Euclidean
from .rng import stream
from .stats import Z95, nearest_rank, wilson_interval

CONVERSE_FLOOR = (1.0 - math.exp(-1.0)) / 2.0
PILOT_FILE = os.path.join(os.path.dirname(__file__), "data", "pilot_thresholds.json")


class ScenarioWarning(UserWarning):
    """The sampler's moment regime does not match the scenario's hypothesis."""


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentConfig:
    """A resolved experiment description (see :mod:`symfrechet.config`)."""

    raw: dict

    @classmethod
    def from_dict(cls, d: dict, seed: int | None = None) -> "ExperimentConfig":
        return cls(cfgmod.resolve(d, seed))

    @property
    def scenario(self) -> str:
        return self.raw["scenario"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def sample_sizes(self) -> list[int]:
        return list(self.raw["sample_sizes"])

    @property
    def replications(self) -> list[int]:
        return list(self.raw["replications"])

    @property
    def epsilons(self) -> list[float]:
        return list(self.raw["epsilons"])

    def to_json(self) -> str:
        return cfgmod.canonical_json(self.raw)


@dataclass(frozen=True)
class TrialRecord:
    scenario: str
    space: str
    n: int
    replication: int
    distance: float
    mismatch: bool
    mean_sq_radius: float
    converged: bool
    gradient_norm: float
    distance_lower: float = 0.0
    distance_upper: float = math.inf
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.distance >= 0:
            raise DomainError("distance must be >= 0")


@dataclass
class Exceedance:
    epsilon: float
    probability: float
    lower: float
    upper: float
    standard_error: float


@dataclass
class SummaryRow:
    space: str
    n: int
    replications: int
    median: float
    q90: float
    exceedance: list[Exceedance]
    mismatch_frequency: float
    mismatch_lower: float
    mismatch_upper: float
    unresolved: int
    nonconverged: int
    analytic: dict[str, float] = field(default_factory=dict)


@dataclass
class ConvergenceSummary:
    scenario: str
    rows: list[SummaryRow]
    checks: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    modulation: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self) | {"passed": self.passed}


# ---------------------------------------------------------------------------
# analytic quantities


def theorem_i_sum_p_bound(k: int, alpha: float, n: int) -> float:
    """Closed-form upper bound ``2^{m/2} n exp(-n^{2(1-alpha)}/4)``, m = k(k+1)/2."""
    m = k * (k + 1) / 2
    return 2.0 ** (m / 2) * n * math.exp(-(n ** (2 * (1 - alpha))) / 4)


def theorem_i_sum_p_exact(k: int, alpha: float, n: int) -> float:
    """``sum_i P(d(X_i, mu) > n)`` where ``d(X_i, mu)^2 / i^alpha ~ chi^2_m``."""
    m = k * (k + 1) // 2
    i = np.arange(1, n + 1, dtype=float)
    return float(np.sum(sps.chi2.sf(n * n / i**alpha, m)))


def theorem_i_second_moment_bound(k: int, alpha: float, n: int) -> float:
    """Closed-form upper bound ``(m) n^{alpha-1} (1+1/n)^{alpha+1} / (alpha+1)`` on ``n^-2 sum E d^2``."""
    m = k * (k + 1) / 2
    return m * n ** (alpha - 1) * (1 + 1 / n) ** (alpha + 1) / (alpha + 1)


def theorem_i_second_moment_exact(k: int, alpha: float, n: int) -> float:
    """``n^-2 sum_i E[d^2(X_i, mu)] = m n^-2 sum_i i^alpha``; truncation only lowers it."""
    m = k * (k + 1) / 2
    return float(m * np.sum(np.arange(1, n + 1, dtype=float) ** alpha) / n**2)


def loglog_tail_functional(n: float) -> float:
    """``n P(d > n) = e / log n`` for the loglog-tail law, n >= e."""
    return math.e / math.log(n)


# ---------------------------------------------------------------------------
# single replication


@lru_cache(maxsize=16)
def _context(cfg_json: str, row: int):
    cfg = json.loads(cfg_json)
    space = cfgmod.build_space(cfgmod.spaces_of(cfg)[row])
    sampler = None if cfg["sampler"]["kind"] == "growing_gaussian" else cfgmod.build_sampler(space, cfg["sampler"])
    return cfg, space, sampler, cfgmod.build_solver(cfg["solver"])


def run_trial(cfg_json: str, row: int, n: int, rep: int) -> TrialRecord:
    cfg, space, sampler, solver = _context(cfg_json, row)
    scen = cfg["scenario"]
    t0 = time.perf_counter()
    rng = stream(int(cfg["seed"]), cfgmod.SCENARIOS.index(scen), row, n, rep)
    if scen == "theorem_i_nonidentical":
        sd = np.sqrt(np.arange(1, n + 1, dtype=float) ** cfg["sampler"]["alpha"])
        coords = rng.standard_normal((n, space.dim)) * sd[:, None]
    else:
        coords = sampler.sample_coords(rng, n)
    radii = np.linalg.norm(coords, axis=1)
    base = space.origin()
    converged, gnorm = True, 0.0
    lower = max(0.0, (2.0 * radii.max() - radii.sum()) / n)
    upper = float(np.linalg.norm(coords.mean(axis=0)))
    if scen == "converse_pareto":
        # Euclidean: the Fréchet mean is S_n / n, and orthonormal coordinates carry the Gram norm
        dist = float(np.linalg.norm(coords.mean(axis=0)))
    elif n == 1:
        dist = float(radii[0])
    else:
        V = space.coords_to_tangent(base, coords)
        res = frechet_mean_normal(space, base, V, solver)
        dist, gnorm, converged = res.distance, res.gradient_norm, res.converged
        if not converged:
            # the true distance lies in the bracket; the stalled iterate need not
            dist = min(max(dist, lower), upper)
    return TrialRecord(
        scenario=scen,
        space=space.tag,
        n=n,
        replication=rep,
        distance=dist,
        mismatch=bool(np.any(radii > n)),
        mean_sq_radius=float(np.mean(radii**2)),
        converged=bool(converged),
        gradient_norm=float(gnorm),
        distance_lower=float(lower),
        distance_upper=upper,
        wall_time=time.perf_counter() - t0,
    )


def _run_chunk(args) -> list[TrialRecord]:
    cfg_json, row, n, lo, hi = args
    return [run_trial(cfg_json, row, n, r) for r in range(lo, hi)]


def simulate(config: ExperimentConfig, jobs: int = 1, chunk: int = 50) -> list[TrialRecord]:
    """All replications of every (space row, n), in (row, n, replication) order."""
    if jobs < 1:
        raise DomainError("jobs must be >= 1")
    cfg_json = config.to_json()
    rows = len(cfgmod.spaces_of(config.raw))
    tasks = [
        (cfg_json, row, n, lo, min(lo + chunk, reps))
        for row in range(rows)
        for n, reps in zip(config.sample_sizes, config.replications)
        for lo in range(0, reps, chunk)
    ]
    if jobs == 1:
        parts = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    return [rec for part in parts for rec in part]


# ---------------------------------------------------------------------------
# aggregation


def aggregate(records: Sequence[TrialRecord], epsilons: Sequence[float] = (0.25, 0.5, 1.0)) -> ConvergenceSummary:
    """Fold records into per-(space, n) rows.

    Quantiles use the nearest-rank rule: the q-quantile of N values is the
    value of rank ``ceil(q N)`` in ascending order.  A record counts as
    *unresolved* when the solver did not converge and its distance bracket
    ``[distance_lower, distance_upper]`` does not settle ``d > eps`` for
    some epsilon.
    """
    records = list(records)
    if not records:
        raise DomainError("no records to aggregate")
    scen = records[0].scenario
    if any(r.scenario != scen for r in records):
        raise DomainError("records mix scenarios")
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.space, r.n), []).append(r)
    rows = []
    for (space, n), grp in groups.items():
        grp = sorted(grp, key=lambda r: r.replication)
        d = np.array([r.distance for r in grp])
        N = len(grp)
        exc = []
        for eps in epsilons:
            k = int(np.sum(d > eps))
            lo, hi = wilson_interval(k, N)
            p = k / N
            exc.append(Exceedance(float(eps), p, lo, hi, math.sqrt(p * (1 - p) / N)))
        mm = sum(r.mismatch for r in grp)
        mlo, mhi = wilson_interval(mm, N)
        unresolved = sum(
            1 for r in grp if not r.converged and any(r.distance_lower <= e < r.distance_upper for e in epsilons)
        )
        rows.append(
            SummaryRow(
                space=space,
                n=n,
                replications=N,
                median=nearest_rank(d, 0.5),
                q90=nearest_rank(d, 0.9),
                exceedance=exc,
                mismatch_frequency=mm / N,
                mismatch_lower=mlo,
                mismatch_upper=mhi,
                unresolved=unresolved,
                nonconverged=sum(not r.converged for r in grp),
            )
        )
    return ConvergenceSummary(scen, rows)


def exceedance_at(row: SummaryRow, eps: float) -> Exceedance:
    for e in row.exceedance:
        if math.isclose(e.epsilon, eps):
            return e
    raise DomainError(f"epsilon {eps} not on the grid")


def nonincreasing_with_one_inversion(values: Sequence[float]) -> bool:
    return sum(b > a for a, b in zip(values, values[1:])) <= 1


def decreasing(values: Sequence[float]) -> bool:
    """Nonincreasing along the grid and strictly lower at the end than at the start."""
    return all(b <= a for a, b in zip(values, values[1:])) and values[-1] < values[0]


def pilot_threshold(scenario: str, space_tag: str, eps: float) -> float | None:
    """Committed pilot threshold for ``P(d(mu_n, mu) > eps)`` at the largest n, if any."""
    try:
        with open(PILOT_FILE, encoding="utf-8") as fh:
            table = json.load(fh)
    except FileNotFoundError:
        return None
    for entry in table.get("thresholds", []):
        if entry["scenario"] == scenario and entry["space"] == space_tag and math.isclose(entry["epsilon"], eps):
            return float(entry["threshold"])
    return None


# ---------------------------------------------------------------------------
# scenario runners


def _expect(config: ExperimentConfig, scenario: str) -> None:
    if config.scenario != scenario:
        raise ConfigError(f"expected scenario {scenario}, got {config.scenario}")


def _union_bound_check(summary: ConvergenceSummary, key: str) -> bool:
    # the mismatch event is a union of the per-draw events whose probabilities sum to analytic[key]
    ok = True
    for r in summary.rows:
        se = math.sqrt(max(r.mismatch_frequency * (1 - r.mismatch_frequency), 1e-300) / r.replications)
        ok &= r.mismatch_frequency <= r.analytic[key] + 3 * se
    return bool(ok)


def _convergence_checks(summary: ConvergenceSummary, config: ExperimentConfig, threshold: float | None) -> None:
    eps = float(config.raw["pass_epsilon"])
    if eps not in config.epsilons:
        raise ConfigError("pass_epsilon must be on the epsilon grid")
    probs = [exceedance_at(r, eps).probability for r in summary.rows]
    summary.checks["exceedance_decreasing"] = decreasing(probs) if len(probs) > 1 else True
    summary.checks["median_monotone"] = nonincreasing_with_one_inversion([r.median for r in summary.rows])
    summary.checks["resolved"] = all(r.unresolved == 0 for r in summary.rows)
    if threshold is not None:
        summary.checks["below_threshold"] = probs[-1] < threshold
        summary.notes.append(f"threshold at n={summary.rows[-1].n}, eps={eps}: {threshold:.6g}")
    else:
        summary.notes.append("no threshold available; below_threshold not evaluated")


def _threshold(config: ExperimentConfig, space_tag: str) -> float | None:
    if config.raw["threshold"] is not None:
        return float(config.raw["threshold"])
    return pilot_threshold(config.scenario, space_tag, float(config.raw["pass_epsilon"]))


def run_theorem_i(config: ExperimentConfig, jobs: int = 1, records: list | None = None) -> ConvergenceSummary:
    """Non-identical log-normal draws on SPD(k): draw i has tangent covariance i^alpha I."""
    _expect(config, "theorem_i_nonidentical")
    alpha = float(config.raw["sampler"]["alpha"])
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    k = int(config.raw["space"]["k"])
    records = simulate(config, jobs) if records is None else records
    summary = aggregate(records, config.epsilons)
    for r in summary.rows:
        r.analytic = {
            "sum_p_bound": theorem_i_sum_p_bound(k, alpha, r.n),
            "sum_p_exact": theorem_i_sum_p_exact(k, alpha, r.n),
            "second_moment_bound": theorem_i_second_moment_bound(k, alpha, r.n),
            "second_moment_exact": theorem_i_second_moment_exact(k, alpha, r.n),
        }
    summary.checks["union_bound"] = _union_bound_check(summary, "sum_p_exact")
    _convergence_checks(summary, config, _threshold(config, summary.rows[0].space))
    return summary


def _heavy_tail(config: ExperimentConfig, jobs: int, records) -> ConvergenceSummary:
    space = cfgmod.build_space(config.raw["space"])
    sampler = cfgmod.build_sampler(space, config.raw["sampler"])
    tail = sampler.tail_function
    records = simulate(config, jobs) if records is None else records
    summary = aggregate(records, config.epsilons)
    for r in summary.rows:
        if tail is not None:
            r.analytic = {"tail_functional": r.n * float(tail(r.n))}
    if tail is not None:
        summary.checks["union_bound"] = _union_bound_check(summary, "tail_functional")
    _convergence_checks(summary, config, _threshold(config, space.tag))
    return summary


def run_theorem_ii(config: ExperimentConfig, jobs: int = 1, records: list | None = None) -> ConvergenceSummary:
    """I.i.d. heavy-tailed draws; pairs the tail functional n P(d > n) with exceedance."""
    _expect(config, "theorem_ii_heavy_tail")
    space = cfgmod.build_space(config.raw["space"])
    sampler = cfgmod.build_sampler(space, config.raw["sampler"])
    if sampler.finite_mean:
        warnings.warn("sampler has a finite first moment; this is the first-moment regime", ScenarioWarning)
    summary = _heavy_tail(config, jobs, records)
    if sampler.finite_mean:
        summary.notes.append("sampler has a finite first moment")
    return summary


def run_corollary(config: ExperimentConfig, jobs: int = 1, records: list | None = None) -> ConvergenceSummary:
    """I.i.d. draws with a finite first moment (and typically infinite variance)."""
    _expect(config, "corollary_first_moment")
    space = cfgmod.build_space(config.raw["space"])
    sampler = cfgmod.build_sampler(space, config.raw["sampler"])
    if not sampler.finite_mean:
        raise ConfigError("corollary_first_moment needs a sampler with a finite first moment")
    if sampler.finite_variance:
        warnings.warn("sampler has finite variance; the scenario says nothing new", ScenarioWarning)
    summary = _heavy_tail(config, jobs, records)
    if sampler.finite_variance:
        summary.notes.append("sampler has finite variance")
    return summary


def run_converse(config: ExperimentConfig, jobs: int = 1, records: list | None = None) -> ConvergenceSummary:
    """Symmetric Pareto draws in Euclidean space: ``P(|S_n/n| > 1)`` stays above a floor."""
    _expect(config, "converse_pareto")
    space = cfgmod.build_space(config.raw["space"])
    if not isinstance(space, Euclidean):
        raise ConfigError("converse_pareto is stated for Euclidean spaces only")
    sampler = cfgmod.build_sampler(space, config.raw["sampler"])
    eps = sorted(set(config.epsilons) | {1.0})
    records = simulate(config, jobs) if records is None else records
    summary = aggregate(records, eps)
    tail = sampler.tail_function
    ok = True
    for r in summary.rows:
        delta = r.n * float(tail(r.n))
        floor = (1.0 - math.exp(-delta)) / 2.0
        e = exceedance_at(r, 1.0)
        r.analytic = {"tail_functional": delta, "floor": floor}
        ok &= e.probability >= floor - 3 * e.standard_error
    summary.checks["above_floor"] = bool(ok)
    return summary


def run_modulation(config: ExperimentConfig, jobs: int = 1, records: list | None = None) -> ConvergenceSummary:
    """Variance modulation ``n E d^2(mu_n, mu) / E d^2(X, mu)`` per space and n."""
    _expect(config, "modulation")
    spaces = [cfgmod.build_space(s) for s in cfgmod.spaces_of(config.raw)]
    for sp in spaces:
        if not cfgmod.build_sampler(sp, config.raw["sampler"]).finite_variance:
            raise PreconditionError("variance modulation needs E[d^2(X, mu)] < infinity")
    records = simulate(config, jobs) if records is None else records
    summary = aggregate(records, config.epsilons)
    table = modulation_table(records)
    summary.modulation = [dataclasses.asdict(est) | {"space": tag} for tag, est in table]
    flat = {sp.tag: isinstance(sp, Euclidean) or _all_flat(sp) for sp in spaces}
    ok = True
    for tag, est in table:
        if est.n == 1:
            ok &= est.m_hat == 1.0
        elif flat[tag]:
            ok &= abs(est.m_hat - 1.0) <= 3 * est.standard_error
        else:
            ok &= est.m_hat + 3 * est.standard_error < 1.0
    summary.checks["modulation"] = bool(ok)
    return summary


def _all_flat(space) -> bool:
    factors = getattr(space, "factors", None)
    return factors is not None and all(isinstance(f, Euclidean) for f in factors)


def modulation_table(records: Sequence[TrialRecord]) -> list[tuple[str, ModulationEstimate]]:
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.space, r.n), []).append(r)
    out = []
    for (tag, n), grp in groups.items():
        grp = sorted(grp, key=lambda r: r.replication)
        num = np.array([r.distance**2 for r in grp])
        den = np.array([r.mean_sq_radius for r in grp])
        if n == 1:
            num = den
        out.append((tag, modulation_ratio(n, num, den)))
    return out


RUNNERS: dict[str, Callable[..., ConvergenceSummary]] = {
    "theorem_i_nonidentical": run_theorem_i,
    "theorem_ii_heavy_tail": run_theorem_ii,
    "corollary_first_moment": run_corollary,
    "modulation": run_modulation,
    "converse_pareto": run_converse,
}


def run(config: ExperimentConfig, jobs: int = 1) -> tuple[list[TrialRecord], ConvergenceSummary]:
    records = simulate(config, jobs)
    return records, RUNNERS[config.scenario](config, jobs, records)


def plot_rows(summary: ConvergenceSummary) -> list[dict[str, Any]]:
    """Tidy rows ``(n, statistic, value, lower, upper)`` for plotting."""
    out = []
    multi = len({r.space for r in summary.rows}) > 1
    for r in summary.rows:
        prefix = f"{r.space}:" if multi else ""
        out.append(dict(n=r.n, statistic=prefix + "median", value=r.median, lower=r.median, upper=r.median))
        out.append(dict(n=r.n, statistic=prefix + "q90", value=r.q90, lower=r.q90, upper=r.q90))
        for e in r.exceedance:
            out.append(dict(n=r.n, statistic=f"{prefix}exceedance@{e.epsilon:g}", value=e.probability,
                            lower=e.lower, upper=e.upper))
        out.append(dict(n=r.n, statistic=prefix + "mismatch", value=r.mismatch_frequency,
                        lower=r.mismatch_lower, upper=r.mismatch_upper))
        for key, val in r.analytic.items():
            out.append(dict(n=r.n, statistic=prefix + key, value=val, lower=val, upper=val))
    for m in summary.modulation:
        se = m["standard_error"]
        out.append(dict(n=m["n"], statistic=f"{m['space']}:m_hat", value=m["m_hat"],
                        lower=m["m_hat"] - Z95 * se, upper=m["m_hat"] + Z95 * se))
    return out
