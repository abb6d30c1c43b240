import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from cuspscatter import mobius
from cuspscatter.mobius import MoebiusTransform, PointH

coef = st.floats(-3, 3)


@st.composite
def sl2(draw):
    a = draw(coef)
    assume(abs(a) > 0.2)
    b, c = draw(coef), draw(coef)
    return MoebiusTransform(a, b, c, (1 + b * c) / a)


points = st.builds(PointH, st.floats(-3, 3), st.floats(0.1, 3))


def test_normalization_fixes_sign_and_determinant():
    g = MoebiusTransform(-2.0, 0.0, 0.0, -0.5)
    assert (g.a, g.b, g.c, g.d) == (2.0, 0.0, 0.0, 0.5)
    h = MoebiusTransform(2.0, 2.0, 0.0, 2.0)
    assert abs(h.a * h.d - h.b * h.c - 1) < 1e-15


def test_negative_determinant_rejected():
    with pytest.raises(ValueError):
        MoebiusTransform(0.0, 1.0, 1.0, 0.0)


@pytest.mark.parametrize("entries,tag", [
    ((1, 0, 0, 1), "identity"),
    ((2, 0, 0, 0.5), "hyperbolic"),
    ((1, 1, 0, 1), "parabolic"),
    ((0, -1, 1, 0), "elliptic"),
])
def test_classification_examples(entries, tag):
    assert mobius.classify(MoebiusTransform(*entries)).tag == tag


def test_fixed_points_examples():
    pts = mobius.fixed_points(MoebiusTransform(2, 0, 0, 0.5))
    assert [p.value for p in pts] == [0.0, None]
    assert mobius.fixed_points(MoebiusTransform(1, 1, 0, 1))[0].is_infinity
    z = mobius.fixed_points(MoebiusTransform(0, -1, 1, 0))
    assert abs(z.z - 1j) < 1e-15


@pytest.mark.parametrize("n", [2, 3, 4, 5, 7, 12])
def test_rotation_order(n):
    assert mobius.elliptic_order(mobius.rotation(math.pi / n)) == n


def test_irrational_rotation():
    assert mobius.elliptic_order(mobius.rotation(1.0)) == "irrational"


@settings(max_examples=60, deadline=None)
@given(sl2(), sl2(), points)
def test_action_is_a_homomorphism(g, h, z):
    lhs = mobius.apply(mobius.compose(g, h), z)
    rhs = mobius.apply(g, mobius.apply(h, z))
    assert abs(lhs.z - rhs.z) < 1e-9 * (1 + abs(lhs.z))


@settings(max_examples=60, deadline=None)
@given(sl2(), points, points)
def test_distance_is_invariant(g, z, w):
    d0 = mobius.hyperbolic_distance(z, w)
    d1 = mobius.hyperbolic_distance(mobius.apply(g, z), mobius.apply(g, w))
    assert abs(d0 - d1) < 1e-8 * (1 + d0)


@settings(max_examples=60, deadline=None)
@given(sl2())
def test_fixed_points_are_fixed(g):
    cls = mobius.classify(g)
    assume(cls.tag != "identity")
    fp = mobius.fixed_points(g)
    if cls.tag == "elliptic":
        assert abs(mobius.apply(g, fp).z - fp.z) < 1e-8
        return
    for p in fp:
        if p.is_infinity:
            assert abs(g.c) < 1e-12
        else:
            x = p.value
            assert abs((g.a * x + g.b) - x * (g.c * x + g.d)) < 1e-8 * (1 + abs(x)) ** 2


@settings(max_examples=60, deadline=None)
@given(sl2())
def test_class_is_conjugation_invariant(g):
    h = MoebiusTransform(1.3, 0.4, -0.2, (1 + 0.4 * -0.2) / 1.3)
    conj = mobius.compose(h, mobius.compose(g, mobius.inverse(h)))
    t = abs(g.trace)
    assume(abs(t - 2) > 1e-6)
    assert mobius.classify(conj).tag == mobius.classify(g).tag
