import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspscatter import charts
from cuspscatter.charts import ConicalPoint, EndSpec, HFunction, SpecError, SurfaceSpec, WarpedProfile


@settings(max_examples=50, deadline=None)
@given(rho=st.floats(0.0, 0.99), n=st.integers(1, 8))
def test_chart_round_trip(rho, n):
    r = charts.cone_chart_r_from_rho(rho, n)
    assert abs(float(charts.cone_chart_rho_from_r(r, n)) - rho) < 1e-12


def test_chart_rejects_outside_disc():
    with pytest.raises(ValueError):
        charts.cone_chart_r_from_rho(1.0, 3)


def test_pullback_matches_cone_density():
    r = np.array([0.1, 0.5, 1.2])
    g = charts.cone_metric_pullback(r, 0.0, 3)
    assert np.allclose(g[:, 1, 1], np.sinh(r) ** 2 / 9)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hyperbolic_cone_area_closed_form(n):
    # 1 + h = sinh^2 r / r^2 gives area 2 pi (cosh r - 1) / n
    p = ConicalPoint("p", 1.0 / n ** 2, HFunction("sinh"), 1.0)
    r = 0.7
    exact = 2 * math.pi * (math.cosh(r) - 1) / n
    assert abs(charts.ball_area(None, p, r) - exact) < 1e-10 * exact


def test_flat_plane_area():
    assert abs(charts.ball_area(None, (0.0, 0.0), 0.4) - math.pi * 0.16) < 1e-12


def test_shooting_on_hyperbolic_plane():
    # Poincare half-plane metric around i: area 2 pi (cosh r - 1)
    def g(x):
        x = np.atleast_2d(x)
        G = np.zeros(x.shape[:-1] + (2, 2))
        G[..., 0, 0] = G[..., 1, 1] = 1 / x[..., 1] ** 2
        return G
    r = 0.5
    area = charts.ball_area(g, (0.0, 1.0), r)
    assert abs(area - 2 * math.pi * (math.cosh(r) - 1)) < 1e-6


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_constant_estimate_on_exact_cones(n):
    radii = [0.1, 0.2, 0.3, 0.4]
    areas = [(r, math.pi * r * r / n * (1 + 0.3 * r)) for r in radii]
    L, C_hat, n_hat = charts.cone_constant_estimate(areas)
    assert abs(L - 1 / n) < 1e-10
    assert abs(C_hat - 1 / n ** 2) < 1e-10
    assert n_hat == n


def test_constant_estimate_irrational_cone():
    areas = [(r, math.pi * r * r * 0.42) for r in (0.1, 0.2, 0.3)]
    assert charts.cone_constant_estimate(areas)[2] is None


def test_constant_estimate_needs_growth():
    with pytest.raises(ValueError):
        charts.cone_constant_estimate([(0.1, 1.0), (0.2, 0.5), (0.3, 2.0)])


def test_orbifold_needs_integer_order():
    with pytest.raises(SpecError):
        ConicalPoint("q", 0.3, orbifold=True)
    assert ConicalPoint("q", 0.25, orbifold=True).n_orbifold == 2


def test_h_must_vanish_at_apex():
    with pytest.raises(SpecError):
        ConicalPoint("q", 0.25, HFunction("table", log_r=np.array([-3.0, 0.0]), theta=np.array([0.0, 7.0]),
                                          values=np.full((2, 2), 0.5)))


def test_cusps_listed_first():
    with pytest.raises(SpecError):
        SurfaceSpec("x", (EndSpec("regular", 1.0), EndSpec("cusp", 1.0)), None)


def test_bump_profile_is_compactly_supported():
    prof = WarpedProfile.bump(1.0, 0.4, 0.3, 0.8)
    lo, hi = prof.support
    assert lo < 0.3 < hi
    assert not prof.is_free
    assert WarpedProfile.bump(1.0, 0.0).is_free
