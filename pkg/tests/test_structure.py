import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ultrapar.errors import (EllipticityViolation, NonIncreasingRanks, NonPositiveRadius,
                             RankDeficientBlock, ShapeMismatch)
from ultrapar.structure import (GroupBall, ball_volume, build_structure, compose, cube_bounds, dilate,
                                estimate_unit_ball_volume, exp_neg_BT, group_diameter, hnorm,
                                homogeneous_box, invert, measure_c0, prototype, qdist,
                                quasi_symmetry_constant, quasi_triangle_constant, structure_from_dict,
                                three_block)

PROTO, TRI = prototype(), three_block()

coord = st.floats(-2, 2, allow_nan=False)
pt3 = arrays(float, 3, elements=coord)
pt5 = arrays(float, 5, elements=coord)
scale = st.floats(0.25, 4.0)


def test_prototype_shape():
    s = PROTO
    assert (s.N, s.m0, s.Q, s.homogeneous_dimension) == (2, 1, 4, 6)
    assert s.exponents.tolist() == [1.0, 3.0, 2.0]
    assert np.allclose(s.B, [[0, 1], [0, 0]])


def test_three_block_shape():
    s = TRI
    assert (s.N, s.m0, s.r) == (4, 2, 2)
    assert s.homogeneous_dimension == 12
    assert s.exponents.tolist() == [1, 1, 3, 5, 2]


def test_E_prototype_closed_form():
    E = exp_neg_BT(PROTO, 0.7)
    assert np.allclose(E, [[1, 0], [-0.7, 1]], atol=1e-15)


def test_roundtrip_dict():
    for s in (PROTO, TRI):
        s2 = structure_from_dict(s.to_dict())
        assert np.array_equal(s.B, s2.B) and np.array_equal(s.A0, s2.A0)


@pytest.mark.parametrize("kw,err", [
    (dict(blocks=(1, 2), B_blocks=[[[1, 1]]], A0=[[1]], Lambda=2), NonIncreasingRanks),
    (dict(blocks=(2, 1), B_blocks=[[[0], [0]]], A0=np.eye(2), Lambda=2), RankDeficientBlock),
    (dict(blocks=(1, 1), B_blocks=[[[1]]], A0=[[5]], Lambda=2), EllipticityViolation),
    (dict(blocks=(1, 1), B_blocks=[[[1]]], A0=[[1]], Lambda=0.5), EllipticityViolation),
    (dict(blocks=(1, 1), B_blocks=[[[1, 0]]], A0=[[1]], Lambda=2), ShapeMismatch),
    (dict(blocks=(1, 1), B_blocks=[], A0=[[1]], Lambda=2), ShapeMismatch),
])
def test_invalid_structures(kw, err):
    with pytest.raises(err):
        build_structure(**kw)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_E_semigroup(a, b):
    for s in (PROTO, TRI):
        assert np.allclose(exp_neg_BT(s, a) @ exp_neg_BT(s, b), exp_neg_BT(s, a + b), atol=1e-10)


@given(pt3, pt3, pt3)
def test_associativity_prototype(a, b, c):
    s = PROTO
    assert np.allclose(compose(s, compose(s, a, b), c), compose(s, a, compose(s, b, c)), atol=1e-12)


@given(pt5, pt5, pt5)
def test_associativity_three_block(a, b, c):
    s = TRI
    assert np.allclose(compose(s, compose(s, a, b), c), compose(s, a, compose(s, b, c)), atol=1e-11)


@given(pt5)
def test_inverse(a):
    s = TRI
    assert np.allclose(compose(s, a, invert(s, a)), 0, atol=1e-12)
    assert np.allclose(compose(s, invert(s, a), a), 0, atol=1e-12)


@given(pt5, scale)
def test_norm_homogeneity(a, lam):
    s = TRI
    assert hnorm(s, dilate(s, lam, a)) == pytest.approx(lam * hnorm(s, a), rel=1e-12, abs=1e-12)


@given(pt3, scale, scale)
def test_dilations_compose(a, lam, mu):
    s = PROTO
    assert np.allclose(dilate(s, lam, dilate(s, mu, a)), dilate(s, lam * mu, a), rtol=1e-12, atol=1e-12)


@given(pt3, pt3, scale)
def test_dilation_is_automorphism(a, b, lam):
    s = PROTO
    lhs = dilate(s, lam, compose(s, a, b))
    rhs = compose(s, dilate(s, lam, a), dilate(s, lam, b))
    assert np.allclose(lhs, rhs, rtol=1e-11, atol=1e-11)


@given(pt3, pt3, pt3)
def test_qdist_left_invariant(z, w, c):
    s = PROTO
    assert qdist(s, compose(s, c, z), compose(s, c, w)) == pytest.approx(qdist(s, z, w), rel=1e-8, abs=1e-10)


@given(pt3, pt3, scale)
def test_qdist_homogeneous(z, w, lam):
    s = PROTO
    d = qdist(s, dilate(s, lam, z), dilate(s, lam, w))
    assert d == pytest.approx(lam * qdist(s, z, w), rel=1e-8, abs=1e-10)


def test_qdist_zero_on_diagonal(rng):
    z = rng.uniform(-1, 1, (100, 5))
    assert np.all(qdist(TRI, z, z) == 0)


def test_quasi_constants_are_finite():
    for s in (PROTO, TRI):
        assert 1 <= quasi_symmetry_constant(s, 2000) < np.inf
        assert 0 < quasi_triangle_constant(s, 2000) < np.inf


def test_ball_volume_scaling():
    for s in (PROTO, TRI):
        assert ball_volume(s, 2.0) / ball_volume(s, 1.0) == pytest.approx(2.0 ** s.homogeneous_dimension)
    with pytest.raises(NonPositiveRadius):
        ball_volume(PROTO, 0.0)


@pytest.mark.parametrize("s", [PROTO, TRI], ids=["prototype", "three_block"])
def test_unit_ball_volume_against_sobol(s):
    est = estimate_unit_ball_volume(s, 2 ** 16)
    assert est == pytest.approx(s.unit_ball_volume, rel=0.02)


@given(arrays(float, 3, elements=st.floats(-1, 1)), st.floats(0.1, 1.5))
def test_ball_bbox_contains_ball(center, R):
    s = PROTO
    ball = GroupBall(center, R)
    lo, hi = ball.bbox(s)
    rng = np.random.default_rng(0)
    # sample ball points as z0 o delta_R(w) with w in the unit norm ball
    w = rng.uniform(-1, 1, (4000, 3))
    w = w[hnorm(s, w) < 1]
    pts = compose(s, center, dilate(s, R, invert(s, w)))
    pts = pts[ball.contains(s, pts)]
    assert np.all(pts >= lo) and np.all(pts <= hi)


def test_cube_and_box():
    c = cube_bounds(PROTO, [0, 0, 0.5], 0.5)
    assert c.contains(PROTO, np.array([0.0, 0.0, 0.5]))
    b = homogeneous_box(PROTO, [0, 0, 0.5], 0.5, time_factor=0.5)
    assert np.allclose(b.halfwidth, [0.5, 0.125, 0.125])
    assert b.volume() == pytest.approx(1.0 * 0.25 * 0.25)


def test_measure_c0_sandwich():
    c0 = measure_c0(PROTO, 4000)
    assert c0 >= 1
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (2000, 3)) / np.array([c0, c0 ** 3, c0 ** 2])
    assert np.all(qdist(PROTO, np.zeros(3), pts) < 1 + 1e-9)


def test_group_diameter_covers_corners():
    d = group_diameter(PROTO, [-1, -1, 0], [1, 1, 1], 500)
    assert d >= qdist(PROTO, np.array([1.0, 1.0, 1.0]), np.array([-1.0, -1.0, 0.0]))
