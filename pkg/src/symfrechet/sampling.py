"""Geodesically symmetric distributions, truncation, tail functionals and scalar identities.

A :class:`SymmetricSampler` draws a tangent vector at its center from a law
that is invariant under negation and pushes it forward through ``Exp``.
Since the geodesic symmetry about the center acts as negation in normal
coordinates, the resulting law is geodesically symmetric about the center by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, ValidationError
from .manifolds import SPD, Manifold, Point, TangentVector
from .stats import wilson_interval

E = math.e


# ---------------------------------------------------------------------------
# Heavy-tailed radius with P(R > t) = e / (t log t) for t >= e.


def loglog_survival(t):
    """Survival function ``min(1, e / (t log t))``; equal to 1 below ``t = e``."""
    t = np.asarray(t, dtype=float)
    safe = np.maximum(t, E)
    return np.where(t < E, 1.0, E / (safe * np.log(safe)))


def loglog_tail_quantile(u):
    """Radius ``t >= e`` with ``loglog_survival(t) == u``, for ``u`` in (0, 1].

    Solves ``s + log s = 1 - log u`` for ``s = log t`` by Newton's method.
    The left side is increasing and concave, so iterates started at the
    bracket's lower end ``s = 1`` increase monotonically to the root; each
    step is additionally clipped to the bracket ``[1, c]``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(u > 1):
        raise DomainError("quantile level must lie in (0, 1]")
    c = 1.0 - np.log(u)
    s = np.ones_like(c)
    for _ in range(100):
        f = s + np.log(s) - c
        step = f / (1.0 + 1.0 / s)
        s = np.clip(s - step, 1.0, np.maximum(c, 1.0))
        if np.all(np.abs(step) <= 1e-15 * s):
            break
    t = np.exp(s)
    return float(t) if t.ndim == 0 else t


def chernoff_chisq_bound(m: float, x: float) -> float:
    """Upper bound ``2^{m/2} e^{-x/4}`` on ``P(chi^2_m > x)`` (Chernoff with t = 1/4)."""
    if m < 1 or not x > 0:
        raise DomainError("need m >= 1 and x > 0")
    return 2.0 ** (m / 2.0) * math.exp(-x / 4.0)


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RadialLaw:
    """Law of the geodesic radius d(X, mu) for radially symmetric samplers."""

    kind: Literal["chi", "loglog_tail", "pareto", "student_radius"]
    df: float | None = None
    index: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("chi", "loglog_tail", "pareto", "student_radius"):
            raise DomainError(f"unknown radial law {self.kind!r}")
        if not self.scale > 0:
            raise DomainError("scale must be > 0")
        if self.kind == "chi" and not (self.df is not None and self.df >= 1):
            raise DomainError("chi law needs df >= 1")
        if self.kind == "pareto" and not (self.index is not None and self.index > 0):
            raise DomainError("pareto law needs index > 0")
        if self.kind == "student_radius" and not (self.df is not None and self.df > 0):
            raise DomainError("student radius needs df > 0")

    def survival(self, t):
        t = np.asarray(t, dtype=float) / self.scale
        if self.kind == "chi":
            out = stats.chi.sf(t, self.df)
        elif self.kind == "loglog_tail":
            out = loglog_survival(t)
        elif self.kind == "pareto":
            out = np.where(t < 1.0, 1.0, np.maximum(t, 1.0) ** (-self.index))
        else:
            out = np.where(t < 0, 1.0, 2.0 * stats.t.sf(np.maximum(t, 0.0), self.df))
        return float(out) if np.ndim(out) == 0 else out

    def inverse_survival(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "chi":
            out = stats.chi.isf(u, self.df)
        elif self.kind == "loglog_tail":
            out = loglog_tail_quantile(u)
        elif self.kind == "pareto":
            out = u ** (-1.0 / self.index)
        else:
            out = stats.t.isf(0.5 * u, self.df)
        return self.scale * np.asarray(out)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "chi":
            return self.scale * np.sqrt(rng.chisquare(self.df, size))
        # inverse-survival sampling with U uniform on (0, 1]
        return self.inverse_survival(1.0 - rng.random(size))

    def moment_finite(self, p: float) -> bool:
        if self.kind == "chi":
            return True
        if self.kind == "loglog_tail":
            # tail ~ 1/(t log t): E[R^p] < inf exactly for p < 1
            return p < 1
        if self.kind == "pareto":
            return p < self.index
        return p < self.df


@dataclass(frozen=True)
class GaussianLaw:
    """Centered Gaussian on orthonormal tangent coordinates."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DomainError("covariance must be a square matrix")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValidationError("covariance must be symmetric")
        w, q = np.linalg.eigh(0.5 * (cov + cov.T))
        if w.min() < -1e-12 * max(1.0, abs(w).max()):
            raise ValidationError("covariance must be positive semi-definite")
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        root = q * np.sqrt(np.clip(w, 0.0, None))
        object.__setattr__(self, "_root", root)

    @classmethod
    def isotropic(cls, dim: int, sigma: float) -> "GaussianLaw":
        return cls(sigma**2 * np.eye(dim))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, self.covariance.shape[0])) @ self._root.T

    @property
    def isotropic_sigma(self) -> float | None:
        c = self.covariance
        s2 = c[0, 0]
        return float(math.sqrt(s2)) if np.allclose(c, s2 * np.eye(c.shape[0]), atol=1e-15) else None


@dataclass(frozen=True)
class SymmetricSampler:
    """A law on ``space`` that is geodesically symmetric about ``center``."""

    space: Manifold
    center: Point
    law: GaussianLaw | RadialLaw

    def __post_init__(self):
        self.space._own(self.center)
        if isinstance(self.law, GaussianLaw) and self.law.covariance.shape[0] != self.space.dim:
            raise DomainError(f"covariance must be {self.space.dim}x{self.space.dim}")

    # -- tangent draws ---------------------------------------------------
    def sample_coords(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Orthonormal normal coordinates of ``size`` draws, shape (size, dim)."""
        if isinstance(self.law, GaussianLaw):
            return self.law.draw(rng, size)
        r = self.law.sample(rng, size)
        z = rng.standard_normal((size, self.space.dim))
        nz = np.linalg.norm(z, axis=1, keepdims=True)
        return r[:, None] * z / nz

    def sample_tangent(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.space.coords_to_tangent(self.center.coords, self.sample_coords(rng, size))

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.space.exp(self.center.coords, self.sample_tangent(rng, size))

    def sample(self, rng: np.random.Generator) -> Point:
        return Point(self.space.tag, self.sample_array(rng, 1)[0])

    # -- analytic description -------------------------------------------
    @property
    def radial_law(self) -> RadialLaw | None:
        if isinstance(self.law, RadialLaw):
            return self.law
        sigma = self.law.isotropic_sigma
        if sigma is None or sigma == 0:
            return None
        return RadialLaw("chi", df=self.space.dim, scale=sigma)

    @property
    def tail_function(self) -> Callable | None:
        """``t -> P(d(X, mu) > t)`` when known in closed form."""
        if isinstance(self.law, GaussianLaw) and self.law.isotropic_sigma == 0:
            return lambda t: np.where(np.asarray(t, dtype=float) < 0, 1.0, 0.0)
        law = self.radial_law
        return None if law is None else law.survival

    @property
    def finite_mean(self) -> bool:
        return True if isinstance(self.law, GaussianLaw) else self.law.moment_finite(1)

    @property
    def finite_variance(self) -> bool:
        return True if isinstance(self.law, GaussianLaw) else self.law.moment_finite(2)


# ---------------------------------------------------------------------------
def vec_coordinates(space: SPD, v: TangentVector) -> np.ndarray:
    """Isometric coordinates of ``base^{-1/2} v base^{-1/2}`` (length k(k+1)/2)."""
    if not isinstance(space, SPD):
        raise DomainError("vec coordinates are defined on SPD spaces")
    space._own(v.base)
    v_arr = np.asarray(v.vec)
    scale = max(1.0, float(np.abs(v_arr).max(initial=0.0)))
    if np.max(np.abs(v_arr - v_arr.T), initial=0.0) > 1e-12 * scale:
        raise ValidationError("tangent matrix is not symmetric")
    return space.tangent_to_coords(v.base.coords, v_arr)


def from_vec_coordinates(space: SPD, base: Point, c) -> TangentVector:
    space._own(base)
    return TangentVector(base, space.coords_to_tangent(base.coords, np.asarray(c, dtype=float)))


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TruncationScheme:
    level: float
    center: Point

    def __post_init__(self):
        if not self.level > 0:
            raise DomainError("truncation level must be > 0")


def truncate(scheme: TruncationScheme, space: Manifold, x: Point) -> Point:
    """Keep ``x`` when d(x, mu) <= level, otherwise replace it by the center."""
    space._own(x)
    space._own(scheme.center)
    d = float(space.dist(scheme.center.coords, x.coords))
    return x if d <= scheme.level else scheme.center


# ---------------------------------------------------------------------------
def moment_via_tail(
    survival: Callable,
    p: float,
    upper_limit: float,
    breakpoints: Sequence[float] = (),
    grid_size: int = 1001,
) -> float:
    """``E|Y|^p`` as ``int_0^upper p t^{p-1} P(|Y| > t) dt``.

    The mass beyond ``upper_limit`` is dropped; for a survival function that
    vanishes past ``upper_limit`` the result is exact up to quadrature error,
    otherwise the truncation error is ``int_upper^inf p t^{p-1} S(t) dt``.
    """
    if not p > 0:
        raise DomainError("p must be > 0")
    if not upper_limit > 0 or not math.isfinite(upper_limit):
        raise DomainError("upper_limit must be finite and > 0")
    grid = np.linspace(0.0, upper_limit, grid_size)
    sv = np.asarray(survival(grid), dtype=float)
    if np.any(sv < -1e-12) or np.any(sv > 1 + 1e-12):
        raise ValidationError("survival function leaves [0, 1]")
    if np.any(np.diff(sv) > 1e-12):
        raise ValidationError("survival function is not nonincreasing")

    def integrand(t):
        return p * t ** (p - 1.0) * float(survival(t))

    pts = sorted(b for b in breakpoints if 0 < b < upper_limit)
    edges = [0.0, *pts, upper_limit]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-11, epsrel=1e-11, limit=500)
        total += val
    return total


@dataclass
class SignCheck:
    frequency: float
    n: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.frequency >= self.threshold


def sign_probability(values) -> float:
    """Empirical ``P(Y >= 0)``."""
    y = np.asarray(values, dtype=float)
    if y.size == 0:
        raise DomainError("no values")
    return float(np.mean(y >= 0))


def sign_probability_check(sampler: SymmetricSampler, direction, n: int, rng: np.random.Generator) -> SignCheck:
    """Frequency of ``<v, Log_mu(X)> >= 0`` for a unit tangent direction ``v``.

    ``direction`` is given in orthonormal tangent coordinates at the center.
    Passes when the frequency is at least ``1/2 - 3 sqrt(0.25 / n)``.
    """
    if n < 1000:
        raise DomainError("use at least 1000 draws")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    y = sampler.sample_coords(rng, n) @ d
    return SignCheck(sign_probability(y), n, 0.5 - 3.0 * math.sqrt(0.25 / n))


@dataclass
class TailRow:
    level: float
    value: float
    lower: float
    upper: float
    analytic: bool = field(default=False)


def empirical_tail(
    sampler: SymmetricSampler, levels: Sequence[float], n_samples: int, rng: np.random.Generator
) -> list[TailRow]:
    """``n * P(d(X, mu) > n)`` at each level; exact when the sampler has a tail function."""
    levels = [float(x) for x in levels]
    if any(x <= 0 for x in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
        raise DomainError("levels must be positive and increasing")
    tail = sampler.tail_function
    if tail is not None:
        return [TailRow(n, n * float(tail(n)), n * float(tail(n)), n * float(tail(n)), True) for n in levels]
    if n_samples < 10_000:
        raise DomainError("use at least 10^4 draws for an empirical tail")
    r = np.linalg.norm(sampler.sample_coords(rng, n_samples), axis=1)
    rows = []
    for n in levels:
        k = int(np.sum(r > n))
        lo, hi = wilson_interval(k, n_samples)
        rows.append(TailRow(n, n * k / n_samples, n * lo, n * hi, False))
    return rows
