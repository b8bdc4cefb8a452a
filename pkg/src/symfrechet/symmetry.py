"""Geodesic symmetries, transvections and the transvection displacement check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import DegenerateInputError, DomainError
from .manifolds import Manifold, Point

DISPLACEMENT_TOL = 1e-6


@dataclass(frozen=True)
class GeodesicSymmetry:
    """The isometry fixing ``center`` and reversing every geodesic through it."""

    space: Manifold
    center: Point

    def __post_init__(self):
        self.space._own(self.center)

    def __call__(self, x: Point) -> Point:
        return apply_symmetry(self, x)


@dataclass(frozen=True)
class Transvection:
    """Composition of the symmetries about ``mu1`` and ``mu2``.

    ``order="s2_s1"`` applies ``s_mu1`` first (T = s_mu2 o s_mu1);
    ``order="s1_s2"`` applies ``s_mu2`` first.  Both translate along the
    geodesic through the two centers by twice their distance.
    """

    space: Manifold
    mu1: Point
    mu2: Point
    order: Literal["s2_s1", "s1_s2"] = "s2_s1"

    def __post_init__(self):
        self.space._own(self.mu1)
        self.space._own(self.mu2)
        if self.order not in ("s2_s1", "s1_s2"):
            raise DomainError(f"unknown composition order {self.order!r}")

    @property
    def length(self) -> float:
        return 2.0 * float(self.space.dist(self.mu1.coords, self.mu2.coords))

    def apply_array(self, x: np.ndarray, m: int = 1) -> np.ndarray:
        first, second = (self.mu1, self.mu2) if self.order == "s2_s1" else (self.mu2, self.mu1)
        for _ in range(m):
            x = self.space.symmetry(second.coords, self.space.symmetry(first.coords, x))
        return x


def apply_symmetry(s: GeodesicSymmetry, x: Point) -> Point:
    s.space._own(x)
    return Point(s.space.tag, s.space.symmetry(s.center.coords, x.coords))


def apply_transvection(T: Transvection, x: Point, m: int) -> Point:
    if m < 0:
        raise DomainError("iteration count must be >= 0")
    T.space._own(x)
    if m == 0:
        return x
    return Point(T.space.tag, T.apply_array(x.coords, m))


@dataclass
class DisplacementRow:
    m: int
    min_displacement: float
    bound: float
    passed: bool


@dataclass
class DisplacementReport:
    length: float
    rows: list[DisplacementRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def displacement_bound_check(
    space: Manifold,
    mu1: Point,
    mu2: Point,
    sample_points: Sequence[Point] | np.ndarray,
    m_max: int,
    order: Literal["s2_s1", "s1_s2"] = "s2_s1",
    tol: float = DISPLACEMENT_TOL,
) -> DisplacementReport:
    """Check d(x, T^m x) >= m * 2 d(mu1, mu2) - tol for every sample and every m <= m_max."""
    T = Transvection(space, mu1, mu2, order)
    ell = T.length
    if ell / 2.0 <= 1e-8:
        raise DegenerateInputError("mu1 and mu2 coincide; the displacement bound is vacuous")
    if isinstance(sample_points, np.ndarray):
        xs = sample_points
    else:
        pts = list(sample_points)
        for p in pts:
            space._own(p)
        xs = np.stack([p.coords for p in pts]) if pts else np.empty((0,) + space.point_shape)
    if xs.shape[0] == 0:
        raise DomainError("no sample points supplied")
    rows = []
    cur = xs
    for m in range(1, m_max + 1):
        cur = T.apply_array(cur, 1)
        disp = space.dist(xs, cur)
        lo = float(np.min(disp))
        rows.append(DisplacementRow(m, lo, ell * m, bool(lo >= ell * m - tol)))
    return DisplacementReport(ell, rows)
