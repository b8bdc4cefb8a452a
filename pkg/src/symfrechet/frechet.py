"""Sample Fréchet mean on Hadamard manifolds, and the inequalities it satisfies.

The default solver is a Riemannian Newton iteration on the sum of squared
distances, using each space's closed-form Hessian; the plain Karcher flow
``mu <- Exp_mu(step * mean_i Log_mu(x_i))`` is available as ``method="karcher"``.
Both start at the first sample, halve the step whenever the objective
would increase, and cap each step so the iterate never strays far from the
origin of a frame that follows it.  Newton matters for heavy-tailed
samples on curved spaces: a point at distance D stiffens the objective by
about D coth D across its direction, which stalls the fixed-point flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .manifolds import Manifold, Point
from .rng import stream


@dataclass(frozen=True)
class SolverConfig:
    gradient_tolerance: float = 1e-9
    max_iterations: int = 200
    step_size: float = 1.0
    method: str = "newton"

    def __post_init__(self):
        if self.method not in ("newton", "karcher"):
            raise DomainError(f"unknown solver method {self.method!r}")
        if not self.gradient_tolerance > 0:
            raise DomainError("gradient_tolerance must be > 0")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not 0 < self.step_size <= 1:
            raise DomainError("step_size must lie in (0, 1]")


@dataclass
class FrechetResult:
    mean: Point
    gradient_norm: float
    iterations: int
    converged: bool
    objective: float = field(default=float("nan"))


class NotConverged(RuntimeError):
    """Raised by callers that require a converged mean."""


def karcher_flow(
    space: Manifold,
    frame,
    coords: np.ndarray,
    config: SolverConfig,
    track: np.ndarray | None = None,
    budget: int | None = None,
):
    """Run the safeguarded iteration in a moving frame.

    The samples enter as orthonormal coordinates ``coords`` of their logs at
    the origin, and ``frame`` carries the origin to the current iterate.  Each
    accepted step moves at most ``space.trust_radius`` and then re-expresses
    the samples at the new iterate, so the iterate always sits at the origin
    and the gradient is simply the average of the rows.  ``track`` holds the
    coordinates of one extra point that is carried along without entering the
    objective; its norm at the end is that point's distance to the mean.

    ``budget`` overrides ``config.max_iterations``.

    Returns ``(frame, gradient_norm, iterations, converged, objective, track)``.
    """
    budget = config.max_iterations if budget is None else budget
    newton = config.method == "newton"
    o = space.origin()
    C = np.asarray(coords, dtype=float)
    V = space.coords_to_tangent(o, C)
    d = np.linalg.norm(C, axis=-1)
    obj = float(np.sum(d * d))
    step = config.step_size
    it = 0
    stalled = 0
    best = math.inf
    prev_obj = math.inf
    while True:
        gnorm = float(np.linalg.norm(C.mean(axis=0)))
        if gnorm <= config.gradient_tolerance:
            return frame, gnorm, it, True, obj, track
        if it >= budget:
            return frame, gnorm, it, False, obj, track
        # Newton halves the gradient every step until round-off sets a floor;
        # stop once it stops doing so.  Damped steps far from the optimum may
        # not halve the gradient but still cut the objective, so those do not
        # count as stalls.
        if newton:
            flat = prev_obj - obj <= 1e-10 * obj
            if gnorm <= 0.5 * best:
                best, stalled = gnorm, 0
            elif not flat:
                best = min(best, gnorm)
            else:
                stalled += 1
                best = min(best, gnorm)
                if stalled >= 5:
                    return frame, gnorm, it, False, obj, track
        direction = C.mean(axis=0)
        if newton:
            h = space.sq_dist_hessian(o, V, d)
            if h is not None:
                direction = np.linalg.solve(h, C.sum(axis=0))
            step = config.step_size
        length = float(np.linalg.norm(direction))
        if length > space.trust_radius:
            direction = direction * (space.trust_radius / length)
        while True:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                m = space.exp(o, space.coords_to_tangent(o, step * direction))
                L, dc = space.log_of_exp(m, o, V)
                cobj = float(np.sum(dc * dc))
            # relative slack absorbs round-off in the objective near the optimum
            if np.isfinite(cobj) and cobj <= obj * (1.0 + 1e-12) and np.all(np.isfinite(L)):
                break
            step *= 0.5
            if step < 1e-12:
                # no descent possible at working precision
                return frame, gnorm, it, False, obj, track
        C = space.tangent_to_coords(m, L)
        V = space.coords_to_tangent(o, C)
        if track is not None:
            t, _ = space.log_of_exp(m, o, space.coords_to_tangent(o, track))
            track = space.tangent_to_coords(m, t)
        frame = space.frame_compose(frame, space.frame_at(m))
        prev_obj, obj, d = obj, cobj, dc
        it += 1


def frechet_mean_array(space: Manifold, xs: np.ndarray, config: SolverConfig = SolverConfig()):
    """Fréchet mean of a stacked array of points; returns the raw flow tuple."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == len(space.point_shape) or xs.shape[0] == 0:
        raise DomainError("need a nonempty stack of points")
    # Composing frames costs a few ulps of the mean's coordinates, so the
    # gradient is re-measured at the returned point and the flow resumes
    # from there until that measurement passes too.
    mu = xs[0]
    total = 0
    for _ in range(8):
        C = space.tangent_to_coords(mu, space.log(mu, xs))
        frame, g, it, ok, obj, _ = karcher_flow(space, space.frame_at(mu), C, config, budget=config.max_iterations - total)
        total += it
        if it:
            mu = space.frame_apply(frame, space.origin())
        if it == 0 or not ok:
            break
    else:
        # still bouncing off the round-off floor of the direct measurement
        ok = False
    return mu, g, total, ok, obj


def frechet_mean(space: Manifold, points: Sequence[Point], config: SolverConfig = SolverConfig()) -> FrechetResult:
    """Sample Fréchet mean ``argmin_m sum_i d^2(x_i, m)``.

    Deterministic: the flow starts at ``points[0]``.  ``converged`` is False
    when the averaged gradient norm is still above tolerance after
    ``config.max_iterations`` accepted steps.
    """
    points = list(points)
    if not points:
        raise DomainError("Fréchet mean of an empty sample")
    for p in points:
        space._own(p)
    xs = np.stack([p.coords for p in points])
    mu, g, it, ok, obj = frechet_mean_array(space, xs, config)
    return FrechetResult(Point(space.tag, mu), g, it, ok, obj)


@dataclass
class TangentMeanResult:
    """Mean of a sample given by tangent draws at ``base``.

    ``distance`` is ``d(base, mean)`` computed inside the solver's frame, so
    it stays accurate even when ``mean`` itself overflows to non-finite
    coordinates.
    """

    mean: np.ndarray
    distance: float
    gradient_norm: float
    iterations: int
    converged: bool


def frechet_mean_normal(
    space: Manifold, base: np.ndarray, tangents: np.ndarray, config: SolverConfig = SolverConfig()
) -> TangentMeanResult:
    """Fréchet mean of the points ``Exp_base(v_i)`` given only the tangent draws.

    The samples are never materialized, so draws far beyond the range where
    their coordinates are representable still enter exactly.  The iteration
    starts at ``base``.
    """
    tangents = np.asarray(tangents, dtype=float)
    if tangents.shape[0] == 0:
        raise DomainError("need a nonempty sample")
    C = space.tangent_to_coords(base, tangents)
    frame, g, it, ok, _, track = karcher_flow(space, space.frame_at(base), C, config, np.zeros(space.dim))
    mean = space.frame_apply(frame, space.origin())
    return TangentMeanResult(mean, float(np.linalg.norm(track)), g, it, ok)


@dataclass
class ShrinkageResult:
    lhs: float
    rhs: float
    holds: bool
    strict: bool


def shrinkage_check(
    space: Manifold, base: Point, points: Sequence[Point], config: SolverConfig = SolverConfig(gradient_tolerance=1e-12, max_iterations=2000)
) -> ShrinkageResult:
    """Compare ``|Log_x(mu_n)|_x`` with ``|mean_i Log_x(x_i)|_x`` at the base point ``x``."""
    space._own(base)
    res = frechet_mean(space, points, config)
    if not res.converged:
        raise NotConverged(f"Fréchet mean did not converge (gradient norm {res.gradient_norm:.3g})")
    xs = np.stack([p.coords for p in points])
    return shrinkage_from_arrays(space, base.coords, xs, res.mean.coords)


def shrinkage_from_arrays(space: Manifold, x: np.ndarray, xs: np.ndarray, mean: np.ndarray) -> ShrinkageResult:
    lhs = float(space.norm(x, space.log(x, mean)))
    rhs = float(space.norm(x, space.log(x, xs).mean(axis=0)))
    return ShrinkageResult(lhs, rhs, lhs <= rhs + 1e-8, rhs - lhs > 1e-6)


@dataclass
class ModulationEstimate:
    n: int
    m_hat: float
    standard_error: float
    replications: int


def modulation_ratio(n: int, mean_sq_dist: np.ndarray, sample_sq_radius: np.ndarray) -> ModulationEstimate:
    """Ratio estimate of ``n E[d^2(mu_n, mu)] / E[d^2(X, mu)]`` with a jackknife standard error.

    ``mean_sq_dist[r]`` is d^2(mu_n, mu) in replication r and
    ``sample_sq_radius[r]`` the average of d^2(X_i, mu) over that
    replication's own draws, so numerator and denominator are paired.
    """
    a = np.asarray(mean_sq_dist, dtype=float)
    b = np.asarray(sample_sq_radius, dtype=float)
    R = a.size
    if R < 2:
        raise DomainError("need at least two replications")
    sa, sb = a.sum(), b.sum()
    if sb <= 0:
        # degenerate law at the center: mu_n = mu always
        return ModulationEstimate(n, 1.0, 0.0, R)
    ratio = n * sa / sb
    loo = n * (sa - a) / (sb - b)
    se = float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return ModulationEstimate(n, float(ratio), se, R)


def modulation_estimate(space: Manifold, sampler, n: int, replications: int, seed: int,
                        config: SolverConfig = SolverConfig()) -> ModulationEstimate:
    """Monte Carlo variance modulation for a finite-variance geodesically symmetric sampler."""
    if sampler.space is not space and sampler.space.tag != space.tag:
        raise DomainError("sampler lives on a different space")
    if not sampler.finite_variance:
        raise PreconditionError("variance modulation needs E[d^2(X, mu)] < infinity")
    if n < 1:
        raise DomainError("n must be >= 1")
    if replications < 2:
        raise DomainError("need at least two replications")
    num = np.empty(replications)
    den = np.empty(replications)
    base = sampler.center.coords
    for r in range(replications):
        rng = stream(seed, 0, n, r)
        V = sampler.sample_tangent(rng, n)
        den[r] = float(np.mean(space.norm(base, V) ** 2))
        if n == 1:
            num[r] = den[r]
            continue
        num[r] = frechet_mean_normal(space, base, V, config).distance ** 2
    return modulation_ratio(n, num, den)
