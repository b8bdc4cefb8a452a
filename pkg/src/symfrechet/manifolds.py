"""Non-compact symmetric spaces and their Riemannian operations.

Four families are provided: Euclidean space with an arbitrary inner product,
hyperbolic space in the hyperboloid model, symmetric positive-definite
matrices with the affine-invariant metric, and finite products of these.

Every array-level method broadcasts over leading batch axes, so a stack of
``n`` points is an array of shape ``(n, *space.point_shape)``.  The typed
:class:`Point` / :class:`TangentVector` wrappers and the module-level
functions (:func:`distance`, :func:`exp`, ...) add space-tag and base-point
checking on top of the array layer.
"""

from __future__ import annotations

import abc
import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError

HYPERBOLOID_TOL = 1e-9
SYM_TOL = 1e-12
# Below this radius the hyperboloid point Exp(base, v) is formed explicitly.
_FAR_RADIUS = 30.0


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def eig_apply(a: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its eigendecomposition."""
    w, q = np.linalg.eigh(sym(a))
    return (q * fn(w)[..., None, :]) @ np.swapaxes(q, -1, -2)


def vec(s: np.ndarray) -> np.ndarray:
    """Isometric coordinates of symmetric matrices.

    Row-major upper triangle; diagonal entries unscaled, off-diagonal entries
    scaled by sqrt(2), so that ``norm(vec(S)) == norm(S, 'fro')``.
    """
    s = np.asarray(s, dtype=float)
    k = s.shape[-1]
    if s.shape[-2] != k:
        raise ValidationError(f"expected square matrices, got shape {s.shape}")
    if not np.allclose(s, np.swapaxes(s, -1, -2), rtol=0.0, atol=SYM_TOL * max(1.0, float(np.max(np.abs(s), initial=0.0)))):
        raise ValidationError("vec() requires symmetric input")
    iu, ju = np.triu_indices(k)
    weights = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return s[..., iu, ju] * weights


def unvec(c: np.ndarray, k: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    c = np.asarray(c, dtype=float)
    m = c.shape[-1]
    if k is None:
        k = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if k * (k + 1) // 2 != m:
        raise ValidationError(f"length {m} is not a triangular number")
    iu, ju = np.triu_indices(k)
    weights = np.where(iu == ju, 1.0, np.sqrt(2.0))
    out = np.zeros(c.shape[:-1] + (k, k))
    out[..., iu, ju] = c / weights
    out[..., ju, iu] = c / weights
    return out


class Manifold(abc.ABC):
    """Array-level interface every space implements."""

    tag: str
    dim: int
    point_shape: tuple[int, ...]

    # -- typed construction ---------------------------------------------
    def point(self, coords) -> "Point":
        # validate what the caller gave, then project away round-off
        x = self.check_point(np.asarray(coords, dtype=float))
        return Point(self.tag, self.project(x))

    def tangent(self, base: "Point", vec_) -> "TangentVector":
        self._own(base)
        v = np.asarray(vec_, dtype=float)
        self.check_tangent(base.coords, v)
        return TangentVector(base, self.project_tangent(base.coords, v))

    def zero_tangent(self, base: "Point") -> "TangentVector":
        return self.tangent(base, np.zeros_like(base.coords))

    def _own(self, p: "Point") -> None:
        if p.space_tag != self.tag:
            raise DomainError(f"point belongs to {p.space_tag!r}, not {self.tag!r}")

    # -- constraints -------------------------------------------------------
    def batch_shape(self, x: np.ndarray) -> tuple[int, ...]:
        nd = len(self.point_shape)
        if x.shape[x.ndim - nd:] != self.point_shape:
            raise ValidationError(f"{self.tag}: expected trailing shape {self.point_shape}, got {x.shape}")
        return x.shape[: x.ndim - nd]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def project_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v

    def check_point(self, x: np.ndarray) -> np.ndarray:
        self.batch_shape(x)
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.tag}: non-finite coordinates")
        return x

    def check_tangent(self, x: np.ndarray, v: np.ndarray) -> None:
        self.batch_shape(v)
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"{self.tag}: non-finite tangent coordinates")

    # -- geometry ----------------------------------------------------------
    @abc.abstractmethod
    def origin(self) -> np.ndarray: ...

    @abc.abstractmethod
    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def exp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def log(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def coords_to_tangent(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Map orthonormal coordinates in R^dim to a tangent vector at ``x``."""

    @abc.abstractmethod
    def tangent_to_coords(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def norm(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def symmetry(self, center: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.exp(center, -self.log(center, x))

    def geodesic(self, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
        return self.exp(x, float(t) * self.log(x, y))

    def log_of_exp(self, m: np.ndarray, base: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``Log_m(Exp_base(v))`` and ``d(m, Exp_base(v))``.

        Spaces whose coordinates overflow for large ``|v|`` override this with
        a formulation that never materializes ``Exp_base(v)``.
        """
        y = self.exp(base, v)
        return self.log(m, y), self.dist(m, y)

    def sq_dist_hessian(self, m: np.ndarray, logs: np.ndarray, dists: np.ndarray) -> np.ndarray | None:
        """Hessian at ``m`` of ``sum_i d^2(m, x_i) / 2`` in orthonormal coordinates.

        ``logs`` holds ``Log_m(x_i)`` and ``dists`` the matching distances.
        Returns None when the space has no closed form.
        """
        return None

    # -- transvections ----------------------------------------------------
    # ``frame_at(x)`` is the isometry carrying the origin to ``x`` whose
    # differential there is the orthonormal frame of ``coords_to_tangent(x, .)``.
    # Solvers compose these to walk arbitrarily far while every computation
    # happens next to the origin.

    # farthest a single solver step may move from the origin; log_of_exp
    # loses about e^{2r} ulps at an iterate at distance r
    trust_radius: float = 2.0

    @abc.abstractmethod
    def frame_at(self, x: np.ndarray): ...

    @abc.abstractmethod
    def frame_compose(self, f, g): ...

    @abc.abstractmethod
    def frame_apply(self, f, x: np.ndarray) -> np.ndarray: ...

    # -- random generation (tests, invariant suites) -----------------------
    def random_point(self, rng: np.random.Generator, size: tuple[int, ...] = (), scale: float = 1.0) -> np.ndarray:
        c = scale * rng.standard_normal(tuple(size) + (self.dim,))
        o = self.origin()
        return self.exp(o, self.coords_to_tangent(o, c))

    def random_tangent(self, rng: np.random.Generator, x: np.ndarray, scale: float = 1.0) -> np.ndarray:
        c = scale * rng.standard_normal(self.batch_shape(x) + (self.dim,))
        return self.coords_to_tangent(x, c)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.tag}>"


# ---------------------------------------------------------------------------
class Euclidean(Manifold):
    """R^k with the inner product <u, v> = u^T G v."""

    def __init__(self, k: int, gram=None):
        if int(k) < 1:
            raise DomainError("dimension must be >= 1")
        self.dim = int(k)
        self.point_shape = (self.dim,)
        if gram is None:
            g = np.eye(self.dim)
        else:
            g = np.asarray(gram, dtype=float)
            if g.shape != (self.dim, self.dim):
                raise ValidationError(f"Gram matrix must be {self.dim}x{self.dim}")
            if not np.allclose(g, g.T, rtol=0, atol=SYM_TOL * max(1.0, np.abs(g).max())):
                raise ValidationError("Gram matrix must be symmetric")
            g = sym(g)
            if np.linalg.eigvalsh(g).min() <= 0:
                raise ValidationError("Gram matrix must be positive definite")
        self.gram = g
        self.gram.setflags(write=False)
        self._chol = np.linalg.cholesky(g)
        self._chol_inv = np.linalg.inv(self._chol)
        if np.array_equal(g, np.eye(self.dim)):
            self.tag = f"euclidean({self.dim})"
        else:
            digest = hashlib.sha1(np.ascontiguousarray(g).tobytes()).hexdigest()[:8]
            self.tag = f"euclidean({self.dim};G={digest})"

    def origin(self):
        return np.zeros(self.dim)

    def dist(self, x, y):
        return np.linalg.norm((np.asarray(y) - np.asarray(x)) @ self._chol, axis=-1)

    def exp(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def log(self, x, y):
        return np.asarray(y) - np.asarray(x)

    def inner(self, x, u, v):
        return np.einsum("...i,ij,...j->...", u, self.gram, v)

    def norm(self, x, v):
        return np.linalg.norm(np.asarray(v) @ self._chol, axis=-1)

    def symmetry(self, center, x):
        return 2.0 * np.asarray(center) - np.asarray(x)

    def coords_to_tangent(self, x, c):
        # v = L^{-T} c, written for row vectors
        return np.asarray(c) @ self._chol_inv

    def tangent_to_coords(self, x, v):
        return np.asarray(v) @ self._chol

    def log_of_exp(self, m, base, v):
        w = np.asarray(base) + np.asarray(v) - np.asarray(m)
        return w, self.norm(m, w)

    def sq_dist_hessian(self, m, logs, dists):
        return float(np.size(dists)) * np.eye(self.dim)

    trust_radius = math.inf

    def frame_at(self, x):
        return np.array(x, dtype=float)

    def frame_compose(self, f, g):
        return f + g

    def frame_apply(self, f, x):
        return np.asarray(x) + f


# ---------------------------------------------------------------------------
def minkowski(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]


def d_coth_d(d: np.ndarray) -> np.ndarray:
    d = np.abs(np.asarray(d, dtype=float))
    small = d < 1e-4
    safe = np.where(small, 1.0, d)
    return np.where(small, 1.0 + d * d / 3.0, safe / np.tanh(safe))


def _sinhc(r: np.ndarray) -> np.ndarray:
    small = r < 1e-6
    safe = np.where(small, 1.0, r)
    return np.where(small, 1.0 + r * r / 6.0, np.sinh(safe) / safe)


class Hyperboloid(Manifold):
    """Hyperbolic space H^k of curvature -1, upper sheet of <x,x>_M = -1 in R^{k+1}."""

    def __init__(self, k: int):
        if int(k) < 1:
            raise DomainError("dimension must be >= 1")
        self.dim = int(k)
        self.point_shape = (self.dim + 1,)
        self.tag = f"hyperboloid({self.dim})"

    def origin(self):
        o = np.zeros(self.dim + 1)
        o[0] = 1.0
        return o

    def project(self, x):
        x = np.array(x, dtype=float)
        x[..., 0] = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
        return x

    def check_point(self, x):
        super().check_point(x)
        scale = np.maximum(1.0, x[..., 0] ** 2)
        if np.any(x[..., 0] <= 0) or np.any(np.abs(minkowski(x, x) + 1.0) > HYPERBOLOID_TOL * scale):
            raise ValidationError(f"{self.tag}: point off the upper hyperboloid sheet")
        return x

    def project_tangent(self, x, v):
        x = np.asarray(x)
        return v + minkowski(x, v)[..., None] * x

    def check_tangent(self, x, v):
        super().check_tangent(x, v)
        scale = (1.0 + np.linalg.norm(x, axis=-1)) * (1.0 + np.linalg.norm(v, axis=-1))
        if np.any(np.abs(minkowski(x, v)) > HYPERBOLOID_TOL * scale):
            raise ValidationError(f"{self.tag}: vector not Minkowski-orthogonal to its base")

    def dist(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        z = -minkowski(x, y)
        diff = y - x
        chord = np.sqrt(np.maximum(minkowski(diff, diff), 0.0))
        near = 2.0 * np.arcsinh(0.5 * chord)
        far = np.arccosh(np.maximum(z, 1.0))
        return np.where(z < 2.0, near, far)

    def exp(self, x, v):
        x = np.asarray(x)
        v = np.asarray(v)
        r = np.sqrt(np.maximum(minkowski(v, v), 0.0))[..., None]
        return self.project(np.cosh(r) * x + _sinhc(r) * v)

    def log(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        d = self.dist(x, y)
        w = self.project_tangent(x, y + minkowski(x, y)[..., None] * x)
        nw = np.sqrt(np.maximum(minkowski(w, w), 0.0))
        factor = np.where(nw > 0, d / np.where(nw > 0, nw, 1.0), 0.0)
        return factor[..., None] * w

    def inner(self, x, u, v):
        return minkowski(np.asarray(u), np.asarray(v))

    def symmetry(self, center, x):
        center = np.asarray(center)
        x = np.asarray(x)
        return self.project(-x - 2.0 * minkowski(center, x)[..., None] * center)

    def coords_to_tangent(self, x, c):
        # columns 1..k of the Lorentz boost taking the origin to x
        x = np.asarray(x)
        c = np.asarray(c)
        xs = x[..., 1:]
        xc = np.sum(xs * c, axis=-1)[..., None]
        vs = c + xs * xc / (1.0 + x[..., :1])
        return np.concatenate([xc, vs], axis=-1)

    def tangent_to_coords(self, x, v):
        x = np.asarray(x)
        v = np.asarray(v)
        xs = x[..., 1:]
        vs = v[..., 1:]
        xv = np.sum(xs * vs, axis=-1)[..., None]
        return vs - xs * v[..., :1] + xs * xv / (1.0 + x[..., :1])

    def log_of_exp(self, m, base, v):
        m = np.asarray(m)
        base = np.asarray(base)
        v = np.asarray(v)
        shape = np.broadcast_shapes(m.shape, base.shape, v.shape)
        m, base, v = (np.broadcast_to(a, shape) for a in (m, base, v))
        r = np.sqrt(np.maximum(minkowski(v, v), 0.0))
        far = r > _FAR_RADIUS
        out_log = np.empty(shape)
        out_d = np.empty(shape[:-1])
        near = ~far
        if np.any(near):
            y = self.exp(base[near], v[near])
            out_log[near] = self.log(m[near], y)
            out_d[near] = self.dist(m[near], y)
        if np.any(far):
            # Exp_base(v) = (e^r / 2) * xh with xh = (1+q) base + (1-q) u, q = e^{-2r}
            rf = r[far][..., None]
            u = v[far] / rf
            q = np.exp(-2.0 * rf)
            xh = (1.0 + q) * base[far] + (1.0 - q) * u
            mf = m[far]
            zh = -minkowski(mf, xh)
            log_z = rf[..., 0] - np.log(2.0) + np.log(zh)
            out_d[far] = log_z + np.log1p(np.sqrt(-np.expm1(-2.0 * log_z)))
            w = self.project_tangent(mf, xh + minkowski(mf, xh)[..., None] * mf)
            nw = np.sqrt(np.maximum(minkowski(w, w), 0.0))
            out_log[far] = (out_d[far] / nw)[..., None] * w
        return out_log, out_d

    def sq_dist_hessian(self, m, logs, dists):
        # radial eigenvalue 1, transverse eigenvalue d coth d (curvature -1)
        d = np.asarray(dists, dtype=float).reshape(-1)
        c = self.tangent_to_coords(m, logs).reshape(-1, self.dim)
        safe = np.where(d > 0, d, 1.0)
        u = c / safe[:, None]
        transverse = d_coth_d(d)
        h = np.sum(transverse) * np.eye(self.dim)
        h += np.einsum("i,ia,ib->ab", np.where(d > 0, 1.0 - transverse, 0.0), u, u)
        return h

    def frame_at(self, x):
        # the Lorentz boost taking the origin to x
        x = np.asarray(x, dtype=float)
        xs = x[1:]
        b = np.empty((self.dim + 1, self.dim + 1))
        b[0, 0] = x[0]
        b[0, 1:] = xs
        b[1:, 0] = xs
        b[1:, 1:] = np.eye(self.dim) + np.outer(xs, xs) / (1.0 + x[0])
        return b

    def frame_compose(self, f, g):
        return f @ g

    def frame_apply(self, f, x):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.project(np.asarray(x) @ f.T)


# ---------------------------------------------------------------------------
class SPD(Manifold):
    """k x k symmetric positive-definite matrices with the affine-invariant metric."""

    def __init__(self, k: int):
        if int(k) < 1:
            raise DomainError("dimension must be >= 1")
        self.k = int(k)
        self.dim = self.k * (self.k + 1) // 2
        self.point_shape = (self.k, self.k)
        self.tag = f"spd({self.k})"

    def origin(self):
        return np.eye(self.k)

    def project(self, x):
        return sym(np.asarray(x, dtype=float))

    def check_point(self, x):
        super().check_point(x)
        scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
        if np.max(np.abs(x - np.swapaxes(x, -1, -2)), initial=0.0) > SYM_TOL * scale:
            raise ValidationError(f"{self.tag}: matrix is not symmetric")
        if np.any(np.linalg.eigvalsh(x) <= 0):
            raise ValidationError(f"{self.tag}: matrix is not positive definite")
        return x

    def project_tangent(self, x, v):
        return sym(np.asarray(v, dtype=float))

    def check_tangent(self, x, v):
        super().check_tangent(x, v)
        scale = max(1.0, float(np.max(np.abs(v), initial=0.0)))
        if np.max(np.abs(v - np.swapaxes(v, -1, -2)), initial=0.0) > SYM_TOL * scale:
            raise ValidationError(f"{self.tag}: tangent vector is not symmetric")

    @staticmethod
    def _roots(a):
        w, q = np.linalg.eigh(sym(a))
        qt = np.swapaxes(q, -1, -2)
        sq = np.sqrt(w)[..., None, :]
        return (q * sq) @ qt, (q / sq) @ qt

    def dist(self, x, y):
        _, w = self._roots(x)
        ev = np.linalg.eigvalsh(sym(w @ np.asarray(y) @ w))
        return np.sqrt(np.sum(np.log(ev) ** 2, axis=-1))

    def exp(self, x, v):
        s, w = self._roots(x)
        return sym(s @ eig_apply(w @ np.asarray(v) @ w, np.exp) @ s)

    def log(self, x, y):
        s, w = self._roots(x)
        return sym(s @ eig_apply(w @ np.asarray(y) @ w, np.log) @ s)

    def inner(self, x, u, v):
        _, w = self._roots(x)
        return np.sum((w @ np.asarray(u) @ w) * (w @ np.asarray(v) @ w), axis=(-2, -1))

    def symmetry(self, center, x):
        center = np.asarray(center)
        return sym(center @ eig_apply(x, lambda e: 1.0 / e) @ center)

    def coords_to_tangent(self, x, c):
        s, _ = self._roots(x)
        return sym(s @ unvec(c, self.k) @ s)

    def tangent_to_coords(self, x, v):
        _, w = self._roots(x)
        return vec(sym(w @ np.asarray(v) @ w))

    def log_of_exp(self, m, base, v):
        m = np.asarray(m)
        s_b, w_b = self._roots(base)
        lam, q = np.linalg.eigh(sym(w_b @ np.asarray(v) @ w_b))
        s_m, w_m = self._roots(m)
        # Exp_base(v) = B B^T with B = base^{1/2} Q diag(e^{lam/2}); diagonalize
        # m^{-1/2} B B^T m^{-1/2} by log-scaled one-sided Jacobi on B's columns.
        u, logeig = graded_eigh(w_m @ s_b @ q, 0.5 * lam)
        lg = (u * logeig[..., None, :]) @ np.swapaxes(u, -1, -2)
        return sym(s_m @ lg @ s_m), np.sqrt(np.sum(logeig**2, axis=-1))

    def sq_dist_hessian(self, m, logs, dists):
        # In the eigenbasis U of the normalized log L = U diag(lam) U^T the
        # Hessian is diagonal with entries g(lam_a - lam_b), g(x) = (x/2) coth(x/2).
        _, w = self._roots(m)
        lam, u = np.linalg.eigh(sym(w @ np.asarray(logs).reshape((-1,) + self.point_shape) @ w))
        basis = unvec(np.eye(self.dim), self.k)
        rotated = np.swapaxes(u, -1, -2)[:, None] @ basis[None] @ u[:, None]
        b = vec(sym(rotated))
        iu, ju = np.triu_indices(self.k)
        g = d_coth_d(0.5 * (lam[:, iu] - lam[:, ju]))
        return np.einsum("iac,ic,ibc->ab", b, g, b)

    def frame_at(self, x):
        # X -> x^{1/2} X x^{1/2}, stored as the factor x^{1/2}
        return self._roots(x)[0]

    def frame_compose(self, f, g):
        return f @ g

    def frame_apply(self, f, x):
        with np.errstate(over="ignore", invalid="ignore"):
            return sym(f @ np.asarray(x) @ f.T)


def graded_eigh(c: np.ndarray, h: np.ndarray, tol: float = 1e-15, max_sweeps: int = 30):
    """Eigendecomposition of ``G G^T`` for ``G = c diag(exp(h))`` without forming ``G``.

    One-sided (Hestenes) Jacobi on the columns of ``G``, with each column held
    as a unit vector times ``exp(scale)``.  The rotation is written in terms of
    the scale difference, so column norms spanning far beyond the float range
    are handled and the small eigenvalues keep relative accuracy when ``c`` is
    well conditioned.  Returns ``(U, log_eigenvalues)``.
    """
    a = np.array(c, dtype=float)
    s = np.array(np.broadcast_to(h, a.shape[:-1]), dtype=float)
    nrm = np.linalg.norm(a, axis=-2)
    a /= nrm[..., None, :]
    s += np.log(nrm)
    k = a.shape[-1]
    pairs = [(p, q) for p in range(k - 1) for q in range(p + 1, k)]
    for _ in range(max_sweeps):
        worst = 0.0
        for p, q in pairs:
            # orient each pair so that column j carries the larger scale
            swap = s[..., p] > s[..., q]
            ai = np.where(swap[..., None], a[..., :, q], a[..., :, p])
            aj = np.where(swap[..., None], a[..., :, p], a[..., :, q])
            si = np.where(swap, s[..., q], s[..., p])
            sj = np.where(swap, s[..., p], s[..., q])
            rho = np.sum(ai * aj, axis=-1)
            worst = max(worst, float(np.max(np.abs(rho), initial=0.0)))
            delta = sj - si
            e2 = np.exp(-2.0 * delta)
            half = 0.5 * (1.0 - e2)
            den = half + np.sqrt(rho * rho * e2 + half * half)
            # den == 0 only for an orthogonal pair of equal scale: no rotation
            tau = np.divide(rho, den, out=np.zeros_like(rho), where=den > 0)
            t = tau * np.exp(-delta)
            cs = 1.0 / np.sqrt(1.0 + t * t)
            ni = cs[..., None] * (ai - tau[..., None] * aj)
            nj = cs[..., None] * (aj + (tau * e2)[..., None] * ai)
            li = np.linalg.norm(ni, axis=-1)
            lj = np.linalg.norm(nj, axis=-1)
            ni /= li[..., None]
            nj /= lj[..., None]
            si = si + np.log(li)
            sj = sj + np.log(lj)
            a[..., :, p] = np.where(swap[..., None], nj, ni)
            a[..., :, q] = np.where(swap[..., None], ni, nj)
            s[..., p] = np.where(swap, sj, si)
            s[..., q] = np.where(swap, si, sj)
        if worst < tol:
            break
    return a, 2.0 * s


# ---------------------------------------------------------------------------
class Product(Manifold):
    """Cartesian product; points are flat concatenations of factor coordinates."""

    def __init__(self, factors: Sequence[Manifold]):
        factors = tuple(factors)
        if not factors:
            raise DomainError("product space needs at least one factor")
        self.factors = factors
        self.dim = sum(f.dim for f in factors)
        sizes = [int(np.prod(f.point_shape)) for f in factors]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self._coord_offsets = np.concatenate([[0], np.cumsum([f.dim for f in factors])]).astype(int)
        self.point_shape = (int(self._offsets[-1]),)
        self.tag = "product(" + ",".join(f.tag for f in factors) + ")"

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        x = np.asarray(x)
        batch = x.shape[:-1]
        return [
            x[..., self._offsets[i] : self._offsets[i + 1]].reshape(batch + f.point_shape)
            for i, f in enumerate(self.factors)
        ]

    def combine(self, parts: Sequence[np.ndarray]) -> np.ndarray:
        flat = []
        for f, p in zip(self.factors, parts):
            p = np.asarray(p, dtype=float)
            flat.append(p.reshape(p.shape[: p.ndim - len(f.point_shape)] + (-1,)))
        batch = np.broadcast_shapes(*[a.shape[:-1] for a in flat])
        return np.concatenate([np.broadcast_to(a, batch + a.shape[-1:]) for a in flat], axis=-1)

    def _split_coords(self, c):
        c = np.asarray(c)
        return [c[..., self._coord_offsets[i] : self._coord_offsets[i + 1]] for i in range(len(self.factors))]

    def components(self, p: "Point") -> tuple["Point", ...]:
        self._own(p)
        return tuple(Point(f.tag, part) for f, part in zip(self.factors, self.split(p.coords)))

    def origin(self):
        return self.combine([f.origin() for f in self.factors])

    def project(self, x):
        return self.combine([f.project(p) for f, p in zip(self.factors, self.split(x))])

    def project_tangent(self, x, v):
        return self.combine([f.project_tangent(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(v))])

    def check_point(self, x):
        self.batch_shape(x)
        for f, p in zip(self.factors, self.split(x)):
            f.check_point(p)
        return x

    def check_tangent(self, x, v):
        self.batch_shape(v)
        for f, a, b in zip(self.factors, self.split(x), self.split(v)):
            f.check_tangent(a, b)

    def dist(self, x, y):
        return np.sqrt(sum(f.dist(a, b) ** 2 for f, a, b in zip(self.factors, self.split(x), self.split(y))))

    def exp(self, x, v):
        return self.combine([f.exp(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(v))])

    def log(self, x, y):
        return self.combine([f.log(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(y))])

    def inner(self, x, u, v):
        return sum(
            f.inner(a, b, c) for f, a, b, c in zip(self.factors, self.split(x), self.split(u), self.split(v))
        )

    def symmetry(self, center, x):
        return self.combine([f.symmetry(a, b) for f, a, b in zip(self.factors, self.split(center), self.split(x))])

    def coords_to_tangent(self, x, c):
        return self.combine(
            [f.coords_to_tangent(a, b) for f, a, b in zip(self.factors, self.split(x), self._split_coords(c))]
        )

    def tangent_to_coords(self, x, v):
        return np.concatenate(
            [f.tangent_to_coords(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(v))], axis=-1
        )

    def log_of_exp(self, m, base, v):
        logs, dists = [], []
        for f, a, b, c in zip(self.factors, self.split(m), self.split(base), self.split(v)):
            lg, d = f.log_of_exp(a, b, c)
            logs.append(lg)
            dists.append(d)
        return self.combine(logs), np.sqrt(sum(d**2 for d in dists))

    def sq_dist_hessian(self, m, logs, dists):
        blocks = []
        for f, a, b in zip(self.factors, self.split(m), self.split(logs)):
            bf = b.reshape((-1,) + f.point_shape)
            hf = f.sq_dist_hessian(a, bf, f.norm(a, bf))
            if hf is None:
                return None
            blocks.append(hf)
        h = np.zeros((self.dim, self.dim))
        for i, hf in enumerate(blocks):
            lo, hi = self._coord_offsets[i], self._coord_offsets[i + 1]
            h[lo:hi, lo:hi] = hf
        return h

    @property
    def trust_radius(self):
        return min(f.trust_radius for f in self.factors)

    def frame_at(self, x):
        return tuple(f.frame_at(a) for f, a in zip(self.factors, self.split(x)))

    def frame_compose(self, f, g):
        return tuple(fac.frame_compose(a, b) for fac, a, b in zip(self.factors, f, g))

    def frame_apply(self, f, x):
        return self.combine([fac.frame_apply(a, b) for fac, a, b in zip(self.factors, f, self.split(x))])


# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Point:
    """An element of a manifold, tagged with the owning space."""

    space_tag: str
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector anchored at ``base``."""

    base: Point
    vec: np.ndarray

    def __post_init__(self):
        v = np.array(self.vec, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)


def _same_base(a: Point, b: Point) -> bool:
    if a is b:
        return True
    return a.space_tag == b.space_tag and a.coords.shape == b.coords.shape and np.allclose(
        a.coords, b.coords, rtol=1e-12, atol=1e-12
    )


def distance(space: Manifold, x: Point, y: Point) -> float:
    space._own(x)
    space._own(y)
    return float(space.dist(x.coords, y.coords))


def exp(space: Manifold, base: Point, v: TangentVector) -> Point:
    space._own(base)
    if not _same_base(base, v.base):
        raise DomainError("tangent vector is anchored at a different point")
    if not np.any(v.vec):
        return base
    return Point(space.tag, space.exp(base.coords, v.vec))


def log(space: Manifold, base: Point, y: Point) -> TangentVector:
    space._own(base)
    space._own(y)
    return TangentVector(base, space.log(base.coords, y.coords))


def inner(space: Manifold, u: TangentVector, v: TangentVector) -> float:
    space._own(u.base)
    if not _same_base(u.base, v.base):
        raise DomainError("tangent vectors have different base points")
    return float(space.inner(u.base.coords, u.vec, v.vec))


def norm(space: Manifold, v: TangentVector) -> float:
    return float(np.sqrt(max(inner(space, v, v), 0.0)))


def geodesic(space: Manifold, x: Point, y: Point, t: float) -> Point:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"geodesic parameter {t} outside [0, 1]")
    space._own(x)
    space._own(y)
    if t == 0.0:
        return x
    if t == 1.0:
        return y
    return Point(space.tag, space.geodesic(x.coords, y.coords, t))


def product_space(factors: Sequence[Manifold]) -> Product:
    return Product(factors)
