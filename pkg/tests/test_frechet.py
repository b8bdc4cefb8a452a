import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symfrechet import (
    SPD,
    DomainError,
    Euclidean,
    GaussianLaw,
    Hyperboloid,
    PreconditionError,
    RadialLaw,
    SolverConfig,
    SymmetricSampler,
    distance,
    frechet_mean,
    geodesic,
    modulation_estimate,
    product_space,
    shrinkage_check,
)
from symfrechet.frechet import frechet_mean_array, frechet_mean_normal, modulation_ratio

TIGHT = SolverConfig(gradient_tolerance=1e-12, max_iterations=2000)


def pts(sp, arr):
    return [sp.point(a) for a in arr]


def test_single_point():
    h = Hyperboloid(2)
    x = h.point(h.random_point(np.random.default_rng(0)))
    res = frechet_mean(h, [x])
    assert res.converged and res.iterations == 0
    assert distance(h, res.mean, x) <= 1e-12


def test_empty_sample_rejected():
    with pytest.raises(DomainError):
        frechet_mean(Euclidean(2), [])


def test_euclidean_arithmetic_mean():
    g = np.array([[2.0, 0.3], [0.3, 0.5]])
    e = Euclidean(2, g)
    xs = np.random.default_rng(1).standard_normal((17, 2)) * 3
    res = frechet_mean(e, pts(e, xs))
    assert res.converged
    np.testing.assert_allclose(res.mean.coords, xs.mean(axis=0), atol=1e-9)


def test_spd_inverse_pair_mean():
    s = SPD(3)
    a = s.random_point(np.random.default_rng(2), scale=1.5)
    res = frechet_mean(s, pts(s, [a, np.linalg.inv(a)]))
    assert res.converged
    np.testing.assert_allclose(res.mean.coords, np.eye(3), atol=1e-7)
    mid = geodesic(s, s.point(a), s.point(np.linalg.inv(a)), 0.5)
    assert distance(s, res.mean, mid) <= 1e-7


def test_two_point_mean_is_midpoint_hyperboloid():
    h = Hyperboloid(3)
    rng = np.random.default_rng(3)
    x, y = h.point(h.random_point(rng, scale=2)), h.point(h.random_point(rng, scale=2))
    res = frechet_mean(h, [x, y], TIGHT)
    # ambient coordinates at time-component x0 carry about x0^2 * eps of error
    tol = 1e-12 * max(x.coords[0], y.coords[0]) ** 2
    assert distance(h, res.mean, geodesic(h, x, y, 0.5)) <= max(tol, 1e-10)


def test_first_order_optimality_and_flag():
    h = Hyperboloid(2)
    xs = h.random_point(np.random.default_rng(4), size=(30,), scale=2.0)
    cfg = SolverConfig(gradient_tolerance=1e-10)
    res = frechet_mean(h, pts(h, xs), cfg)
    assert res.converged and res.gradient_norm <= 1e-10
    g = h.log(res.mean.coords, xs).sum(axis=0)
    assert float(h.norm(res.mean.coords, g)) <= 30 * 1e-10


def test_karcher_and_newton_agree():
    s = SPD(2)
    xs = s.random_point(np.random.default_rng(5), size=(12,), scale=1.0)
    a = frechet_mean(s, pts(s, xs), SolverConfig(gradient_tolerance=1e-11, method="newton"))
    b = frechet_mean(s, pts(s, xs), SolverConfig(gradient_tolerance=1e-11, max_iterations=5000, method="karcher"))
    assert a.converged and b.converged
    assert distance(s, a.mean, b.mean) <= 1e-9
    assert a.iterations < b.iterations


def test_nonconvergence_is_reported():
    h = Hyperboloid(2)
    xs = h.random_point(np.random.default_rng(6), size=(10,), scale=3.0)
    res = frechet_mean(h, pts(h, xs), SolverConfig(gradient_tolerance=1e-300, max_iterations=1, method="karcher"))
    assert not res.converged and res.iterations == 1


def test_solver_config_validation():
    for kw in ({"gradient_tolerance": 0}, {"max_iterations": 0}, {"step_size": 0}, {"step_size": 1.5},
               {"method": "sgd"}):
        with pytest.raises(DomainError):
            SolverConfig(**kw)


def test_mean_from_far_tangents_matches_direct_route():
    h = Hyperboloid(2)
    base = h.origin()
    rng = np.random.default_rng(7)
    V = h.coords_to_tangent(base, rng.standard_normal((20, 2)) * 3)
    res = frechet_mean_normal(h, base, V, TIGHT)
    ref, *_ = frechet_mean_array(h, h.exp(base, V), TIGHT)
    assert res.converged
    assert float(h.dist(res.mean, ref)) <= 1e-9
    assert res.distance == pytest.approx(float(h.dist(base, ref)), abs=1e-9)


def _axis_gradient(t, far, near_w, s=0.5):
    # derivative of (far - t)^2 + near_w * a(t)^2 + t^2 with a(t) = acosh(cosh t cosh s),
    # the objective along the x-geodesic
    a = np.arccosh(np.cosh(t) * np.cosh(s))
    da = np.sinh(t) * np.cosh(s) / np.sinh(a)
    return -2.0 * (far - t) + 2.0 * near_w * a * da + 2.0 * t


def test_mean_with_far_sample_matches_axis_oracle():
    # far sample at radius 1000 (cosh overflows); 4 + 4 samples at +-0.5 on the y axis and one at base.
    # By symmetry the mean lies on the x axis, where the objective is one-dimensional.
    from scipy.optimize import brentq

    h = Hyperboloid(2)
    base = h.origin()
    V = np.zeros((10, 3))
    V[0, 1] = 1000.0
    V[1:5, 2] = 0.5
    V[5:9, 2] = -0.5
    res = frechet_mean_normal(h, base, V, SolverConfig(gradient_tolerance=1e-9))
    t_star = brentq(_axis_gradient, 1.0, 300.0, args=(1000.0, 8), xtol=1e-13, rtol=1e-15)
    assert res.converged
    assert res.distance == pytest.approx(t_star, rel=1e-9)
    # the mean itself (radius ~100) is still representable
    assert float(h.dist(base, res.mean)) == pytest.approx(t_star, rel=1e-9)
    assert abs(res.mean[2]) <= 1e-9 * res.mean[0]


def test_unrepresentable_mean_distance_is_exact():
    # with only two near samples the mean sits near radius 666, where its
    # coordinates overflow; its distance from the base is still exact
    h = Hyperboloid(2)
    base = h.origin()
    V = np.zeros((3, 3))
    V[0, 1] = 2000.0
    V[1, 2] = 0.5
    V[2, 2] = -0.5
    res = frechet_mean_normal(h, base, V, SolverConfig(gradient_tolerance=1e-9, max_iterations=1000))
    t_star = (2000.0 - 2.0 * math.log(math.cosh(0.5))) / 3.0  # large-t limit of the axis objective
    assert res.converged
    assert res.distance == pytest.approx(t_star, rel=1e-12)
    assert not np.all(np.isfinite(res.mean))


def test_step_cap_reports_nonconvergence():
    # the same sample with too few iterations to walk out to radius 666
    h = Hyperboloid(2)
    V = np.zeros((3, 3))
    V[0, 1] = 2000.0
    V[1:, 2] = [0.5, -0.5]
    res = frechet_mean_normal(h, h.origin(), V, SolverConfig(max_iterations=50))
    assert not res.converged and res.iterations == 50
    assert res.distance == pytest.approx(50 * h.trust_radius, rel=1e-9)


# -- shrinkage -----------------------------------------------------------------


def test_shrinkage_euclidean_equality():
    e = Euclidean(3)
    rng = np.random.default_rng(8)
    r = shrinkage_check(e, e.point(rng.standard_normal(3)), pts(e, rng.standard_normal((6, 3))))
    assert r.holds and not r.strict
    assert r.lhs == pytest.approx(r.rhs, abs=1e-9)


def test_shrinkage_spd_strict():
    s = SPD(2)
    rng = np.random.default_rng(9)
    r = shrinkage_check(s, s.point(np.eye(2)), pts(s, s.random_point(rng, size=(5,), scale=1.5)))
    assert r.holds and r.strict


def test_shrinkage_collinear_equality():
    h = Hyperboloid(2)
    base = h.origin()
    u = np.array([0.0, 0.6, 0.8])
    xs = np.stack([h.exp(base, t * u) for t in (-1.5, 0.3, 0.9, 2.2, 4.0)])
    r = shrinkage_check(h, h.point(base), pts(h, xs))
    assert r.lhs == pytest.approx(r.rhs, abs=1e-7)
    assert r.holds


SPACES = [Euclidean(2), Hyperboloid(2), SPD(2), product_space([Hyperboloid(2), Euclidean(1)])]


@given(st.integers(0, len(SPACES) - 1), st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_shrinkage_property(i, seed, n):
    sp = SPACES[i]
    rng = np.random.default_rng(seed)
    x = sp.point(sp.random_point(rng))
    r = shrinkage_check(sp, x, pts(sp, sp.random_point(rng, size=(n,))))
    assert r.holds


@given(st.integers(0, len(SPACES) - 1), st.integers(0, 2**32 - 1))
def test_permutation_invariance_property(i, seed):
    sp = SPACES[i]
    rng = np.random.default_rng(seed)
    xs = sp.random_point(rng, size=(7,))
    a = frechet_mean(sp, pts(sp, xs), TIGHT)
    b = frechet_mean(sp, pts(sp, xs[rng.permutation(7)]), TIGHT)
    assert distance(sp, a.mean, b.mean) <= 1e-10


@given(st.integers(0, len(SPACES) - 1), st.integers(0, 2**32 - 1))
def test_symmetry_equivariance_property(i, seed):
    sp = SPACES[i]
    rng = np.random.default_rng(seed)
    xs = sp.random_point(rng, size=(6,), scale=0.5)
    nu = sp.random_point(rng, scale=0.5)
    a = frechet_mean(sp, pts(sp, xs), TIGHT)
    b = frechet_mean(sp, pts(sp, sp.symmetry(nu, xs)), TIGHT)
    assert float(sp.dist(sp.symmetry(nu, a.mean.coords), b.mean.coords)) <= 1e-7


# -- modulation ----------------------------------------------------------------


def test_modulation_n1_is_one():
    h = Hyperboloid(2)
    smp = SymmetricSampler(h, h.point(h.origin()), GaussianLaw.isotropic(2, 1.0))
    est = modulation_estimate(h, smp, 1, 50, seed=3)
    assert est.m_hat == 1.0


def test_modulation_euclidean_near_one():
    e = Euclidean(2)
    smp = SymmetricSampler(e, e.point([0, 0]), GaussianLaw.isotropic(2, 1.0))
    est = modulation_estimate(e, smp, 10, 400, seed=4)
    assert abs(est.m_hat - 1.0) <= 3 * est.standard_error


def test_modulation_requires_finite_variance():
    h = Hyperboloid(2)
    smp = SymmetricSampler(h, h.point(h.origin()), RadialLaw("student_radius", df=1.5))
    with pytest.raises(PreconditionError):
        modulation_estimate(h, smp, 10, 50, seed=1)


def test_modulation_ratio_jackknife_oracle():
    rng = np.random.default_rng(10)
    a, b = rng.exponential(size=40), rng.exponential(size=40) + 1
    est = modulation_ratio(5, a, b)
    assert est.m_hat == pytest.approx(5 * a.sum() / b.sum())
    # direct leave-one-out jackknife
    loo = np.array([5 * np.delete(a, j).sum() / np.delete(b, j).sum() for j in range(40)])
    se = math.sqrt(39 / 40 * np.sum((loo - loo.mean()) ** 2))
    assert est.standard_error == pytest.approx(se, rel=1e-12)
