import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from symfrechet import (
    SPD,
    DegenerateInputError,
    DomainError,
    Euclidean,
    GeodesicSymmetry,
    Hyperboloid,
    Transvection,
    apply_symmetry,
    apply_transvection,
    displacement_bound_check,
    distance,
    product_space,
)


def test_center_is_fixed():
    h = Hyperboloid(2)
    nu = h.point(h.random_point(np.random.default_rng(0)))
    out = apply_symmetry(GeodesicSymmetry(h, nu), nu)
    assert distance(h, out, nu) == pytest.approx(0.0, abs=1e-12)


def test_euclidean_symmetry_negates():
    e = Euclidean(3)
    s = GeodesicSymmetry(e, e.point([0, 0, 0]))
    np.testing.assert_allclose(s(e.point([1, -2, 3])).coords, [-1, 2, -3])


def test_spd_symmetry_at_identity_is_inverse():
    s = SPD(3)
    a = s.random_point(np.random.default_rng(1), scale=1.5)
    out = apply_symmetry(GeodesicSymmetry(s, s.point(np.eye(3))), s.point(a))
    # independent oracle: exp(-log A) through scipy
    np.testing.assert_allclose(out.coords, sla.expm(-sla.logm(a).real), rtol=1e-10)
    np.testing.assert_allclose(out.coords, np.linalg.inv(a), rtol=1e-10)


def test_symmetry_space_mismatch():
    h, e = Hyperboloid(2), Euclidean(2)
    s = GeodesicSymmetry(h, h.point(h.origin()))
    with pytest.raises(DomainError):
        apply_symmetry(s, e.point([0, 0]))


def test_transvection_m0_is_identity():
    e = Euclidean(1)
    t = Transvection(e, e.point([0]), e.point([1]))
    x = e.point([5])
    assert apply_transvection(t, x, 0) is x


def test_euclidean_transvection_translates():
    e = Euclidean(1)
    t = Transvection(e, e.point([0]), e.point([1]), order="s2_s1")
    np.testing.assert_allclose(apply_transvection(t, e.point([5]), 1).coords, [7])
    t2 = Transvection(e, e.point([0]), e.point([1]), order="s1_s2")
    np.testing.assert_allclose(apply_transvection(t2, e.point([5]), 1).coords, [3])
    assert t.length == pytest.approx(2.0)


def test_transvection_rejects_negative_m():
    e = Euclidean(1)
    t = Transvection(e, e.point([0]), e.point([1]))
    with pytest.raises(DomainError):
        apply_transvection(t, e.point([0]), -1)


def test_hyperboloid_transvection_displacement_example():
    rng = np.random.default_rng(2)
    h = Hyperboloid(2)
    mu1 = h.random_point(rng)
    v = h.random_tangent(rng, mu1)
    v *= 0.7 / float(h.norm(mu1, v))
    mu2 = h.exp(mu1, v)
    t = Transvection(h, h.point(mu1), h.point(mu2))
    assert t.length == pytest.approx(1.4, rel=1e-12)
    x = h.point(h.random_point(rng))
    assert distance(h, x, apply_transvection(t, x, 3)) >= 4.2 - 1e-6


def test_spd_displacement_check_passes():
    rng = np.random.default_rng(3)
    s = SPD(2)
    mu1 = s.random_point(rng)
    v = s.random_tangent(rng, mu1)
    mu2 = s.exp(mu1, v * (0.5 / float(s.norm(mu1, v))))
    xs = s.random_point(rng, size=(200,))
    rep = displacement_bound_check(s, s.point(mu1), s.point(mu2), xs, 10)
    assert rep.passed
    assert rep.length == pytest.approx(1.0, rel=1e-10)
    assert [r.m for r in rep.rows] == list(range(1, 11))


def test_euclidean_displacement_exact():
    e = Euclidean(2)
    xs = np.random.default_rng(4).standard_normal((50, 2))
    rep = displacement_bound_check(e, e.point([0, 0]), e.point([0.3, 0.4]), xs, 5)
    for r in rep.rows:
        assert r.min_displacement == pytest.approx(r.bound, rel=1e-12)


def test_displacement_degenerate_centers():
    e = Euclidean(2)
    p = e.point([1, 1])
    with pytest.raises(DegenerateInputError):
        displacement_bound_check(e, p, p, [e.point([0, 0])], 3)


def test_displacement_needs_points():
    e = Euclidean(2)
    with pytest.raises(DomainError):
        displacement_bound_check(e, e.point([0, 0]), e.point([1, 0]), [], 3)


SPACES = [Euclidean(2, np.diag([1.0, 3.0])), Hyperboloid(3), SPD(2), product_space([Hyperboloid(2), SPD(2)])]


@given(st.integers(0, len(SPACES) - 1), st.integers(0, 2**32 - 1))
def test_symmetry_isometry_and_involution(i, seed):
    sp = SPACES[i]
    rng = np.random.default_rng(seed)
    nu, x, y = (sp.random_point(rng) for _ in range(3))
    sx, sy = sp.symmetry(nu, x), sp.symmetry(nu, y)
    d = float(sp.dist(x, y))
    assert float(sp.dist(sx, sy)) == pytest.approx(d, abs=1e-8 * (1 + d))
    assert float(sp.dist(sp.symmetry(nu, sx), x)) <= 1e-8
    assert float(sp.dist(nu, sx)) == pytest.approx(float(sp.dist(nu, x)), abs=1e-8)


@given(st.integers(0, len(SPACES) - 1), st.integers(0, 2**32 - 1), st.sampled_from(["s2_s1", "s1_s2"]))
def test_transvection_displacement_property(i, seed, order):
    sp = SPACES[i]
    rng = np.random.default_rng(seed)
    mu1, mu2 = sp.random_point(rng, scale=0.5), sp.random_point(rng, scale=0.5)
    xs = sp.random_point(rng, size=(5,))
    rep = displacement_bound_check(sp, sp.point(mu1), sp.point(mu2), xs, 4, order=order)
    assert rep.passed
