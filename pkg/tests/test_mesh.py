import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspscatter import mesh as M
from cuspscatter.charts import ConicalPoint, HFunction


def test_rectangle_area_and_perimeter():
    m = M.rectangle(2.0, 0.5, 8, 4)
    assert abs(m.total_area - 1.0) < 1e-14
    total = sum(m.edge_len[t].sum() for t in ("bottom", "right", "top", "left"))
    assert abs(total - 5.0) < 1e-14


def test_stiffness_annihilates_constants_and_is_symmetric():
    m = M.warped_patch(1.0, 1.0, 10, 10, lambda s: 1 + 0.5 * s)
    K = m.stiffness()
    assert np.max(np.abs(K @ np.ones(m.n_nodes))) < 1e-12
    assert abs(K - K.T).max() < 1e-14


def test_dirichlet_energy_of_linear_function():
    m = M.rectangle(1.0, 1.0, 6, 6)
    u = 2 * m.points[:, 0] - m.points[:, 1]
    assert abs(u @ (m.stiffness() @ u) - 5.0) < 1e-12


def test_warped_area_from_edge_lengths():
    # metric w(s)^2 dx^2 + ds^2 with w = 1 + s has area int_0^1 (1 + s) ds = 1.5
    m = M.warped_patch(1.0, 1.0, 40, 40, lambda s: 1 + s)
    assert abs(m.total_area - 1.5) < 1e-3


@pytest.mark.parametrize("n", [2, 3])
def test_cone_mesh_area(n):
    p = ConicalPoint("p", 1.0 / n ** 2, HFunction("zero"), 1.0)
    m = M.cone_mesh(p, 0.5, 24, 96)
    exact = math.pi * 0.25 / n
    assert abs(m.total_area - exact) < 2e-3 * exact


def test_distance_exact_on_flat_strip():
    m = M.rectangle(0.5, 1.0, 10, 20)
    d = M.mesh_distance(m, m.boundary_nodes("bottom"))
    assert np.max(np.abs(d - m.points[:, 1])) < 1e-14


def test_distance_first_order_from_circle():
    errs = []
    for nr, nt in ((15, 24), (30, 48), (60, 96)):
        m = M.polar_disk(1.0, nr, nt)
        d = M.mesh_distance(m, m.boundary_nodes("outer"))
        errs.append(np.max(np.abs(d - (1 - np.hypot(*m.points.T)))))
    assert errs[-1] < 0.02
    assert all(1.6 < a / b < 2.4 for a, b in zip(errs, errs[1:]))


def test_front_model_validated():
    with pytest.raises(ValueError):
        M.mesh_distance(M.rectangle(1.0, 1.0, 2, 2), [0], front="cone")


def test_distance_along_grid_lines_is_exact():
    m = M.rectangle(1.0, 1.0, 8, 8)
    d = M.mesh_distance(m, [0])
    on_axis = np.abs(m.points[:, 1]) < 1e-14
    assert np.max(np.abs(d[on_axis] - m.points[on_axis, 0])) < 1e-14


def test_distance_from_apex_is_radial():
    p = ConicalPoint("p", 1 / 9, HFunction("zero"), 1.0)
    m = M.cone_mesh(p, 0.6, 30, 64)
    d = M.mesh_distance(m, [0])
    r = np.hypot(m.points[:, 0], m.points[:, 1])
    assert np.max(np.abs(d - r)) < 1e-3 * r.max()


def test_sublevel_area_linear_field():
    m = M.rectangle(1.0, 1.0, 7, 7)
    d = m.points[:, 0] + 0.0
    for r in (0.13, 0.5, 0.91):
        assert abs(M.sublevel_area(m, d, r) - r) < 1e-14


def test_excise_tags_hole():
    m = M.rectangle(1.0, 1.0, 20, 20)
    holed, used = M.excise(m, lambda c: np.hypot(c[:, 0] - 0.5, c[:, 1] - 0.5) < 0.2)
    assert len(holed.boundary["hole"]) > 0
    assert holed.total_area < m.total_area
    ring = used[holed.boundary_nodes("hole")]
    rr = np.hypot(m.points[ring, 0] - 0.5, m.points[ring, 1] - 0.5)
    assert rr.min() > 0.1 and rr.max() < 0.3
    assert np.allclose(holed.points, m.points[used])


def test_remap_preserves_operators():
    m = M.polar_disk(1.0, 6, 12)
    rng = np.random.default_rng(0)
    perm = rng.permutation(m.n_nodes)
    m2, _ = M.remap(m, lambda p: p[:, ::-1], perm)
    K1 = m.stiffness().toarray()
    K2 = m2.stiffness().toarray()
    assert np.max(np.abs(K2[np.ix_(perm, perm)] - K1)) < 1e-14
    assert np.allclose(m2.lumped_mass()[perm], m.lumped_mass())


def test_p0_mesh_matches_metric_mesh():
    m = M.rectangle(1.0, 1.0, 4, 4)
    G = np.tile(np.diag([4.0, 1.0]), (len(m.tris), 1, 1))
    p0 = M.from_p0(m.points, m.tris, G)
    assert abs(p0.total_area - 2.0) < 1e-14
    assert abs(p0.edge_len["outer"].sum() - 6.0) < 1e-14


def test_p0_rejects_indefinite_metric():
    m = M.rectangle(1.0, 1.0, 2, 2)
    G = np.tile(np.diag([1.0, -1.0]), (len(m.tris), 1, 1))
    with pytest.raises(ValueError):
        M.from_p0(m.points, m.tris, G)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.3, 3), b=st.floats(0.3, 3))
def test_scaled_metric_scales_area(a, b):
    m = M.rectangle(1.0, 1.0, 5, 5, metric=lambda p: np.tile(np.diag([a * a, b * b]), (len(p), 1, 1)))
    assert abs(m.total_area - a * b) < 1e-12 * a * b
