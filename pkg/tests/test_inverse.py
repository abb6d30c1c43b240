import math

import numpy as np
import pytest

from cuspscatter import charts, inverse as I, mesh as M


@pytest.fixture(scope="module")
def small():
    m = M.warped_patch(1.0, 1.0, 12, 12, lambda s: 1 + 0.5 * s)
    return m, I.eig_bsp(m, ("bottom", "right"), None, nyquist=None)


@pytest.fixture(scope="module")
def strip():
    m = M.rectangle(0.1, 1.0, 20, 200)
    return m, I.eig_bsp(m, "bottom", 140, keep_interior=False)


def test_full_spectrum_reproduces_direct_ndmap(small):
    m, bsp = small
    for z in (-1.0, 3.0 + 0.5j):
        a = I.nd_map(bsp, z).kernel
        b = I.nd_map_direct(m, ("bottom", "right"), z).kernel
        assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(b))


def test_ndmap_symmetric(small):
    _, bsp = small
    assert I.nd_map(bsp, 2.0 + 1j).symmetry_defect() < 1e-12


def test_residue_is_minus_projection(small):
    _, bsp = small
    g = 1
    lam = bsp.group_values[g]
    R = I.nd_residue(bsp, lam, 0.4 * min(abs(lam - bsp.group_values[g - 1]), abs(bsp.group_values[g + 1] - lam)))
    assert np.max(np.abs(R + bsp.kernel(g))) < 1e-10 * np.max(np.abs(bsp.kernel(g)))


def test_lowest_eigenvalue_is_shift(small):
    _, bsp = small
    assert abs(bsp.eigenvalues[0] - I.SHIFT) < 1e-10
    assert abs(np.sum(bsp.weights * bsp.traces[0] ** 2) * (1 / bsp.weights.sum()) -
               1 / (bsp.interior[1].sum())) < 1e-10


@pytest.mark.parametrize("text", [False, True])
def test_archive_round_trip(small, tmp_path, text):
    _, bsp = small
    path = tmp_path / "b.bsp"
    bsp.save(path, text=text)
    back = I.BSP.load(path)
    assert np.array_equal(back.eigenvalues, bsp.eigenvalues)
    assert np.array_equal(back.traces, bsp.traces)
    assert np.array_equal(back.weights, bsp.weights)
    assert back.shift == bsp.shift


def test_nyquist_guard():
    m = M.rectangle(1.0, 1.0, 6, 6)
    with pytest.raises(ValueError):
        I.eig_bsp(m, "bottom", 30)


def test_mass_identity_without_shift(small):
    _, bsp = small
    flat = I.BSP(bsp.eigenvalues, bsp.traces, bsp.weights, bsp.arclength, 0.0)
    f = I.Source(I.boundary_modes(flat, 1), I.TimeBasis("pc", 1.0, 1), np.ones((1, 1)))
    # only the constant mode carries mass: |u(t)|^2 = |Gamma| t^2 / 2 area-normalized
    assert abs(I.blago_mass(flat, f, 1.0).real - bsp.weights.sum() / 2) < 1e-10


def test_blago_inner_matches_interior(small):
    m, bsp = small
    rng = np.random.default_rng(3)
    S = I.boundary_modes(bsp, 3)
    f = I.Source(S, I.TimeBasis("sine", 1.5, 3), rng.standard_normal((3, 3)))
    h = I.Source(S, I.TimeBasis("legendre", 1.2, 3), rng.standard_normal((3, 3)) + 1j)
    a = I.blago_inner(bsp, f, h, 1.1, 0.8)
    d = I.blago_inner_direct(bsp, m, ("bottom", "right"), f, h, 1.1, 0.8)
    assert abs(a - d) < 1e-10 * abs(d)


def test_influence_area_below_truth(strip):
    m, bsp = strip
    res = I.influence_area(bsp, I.InfluenceSpec(0.4))
    assert 0.95 * 0.04 < res.area <= 0.04
    assert res.alpha_used == 1e-8


def test_influence_spec_validation():
    with pytest.raises(ValueError):
        I.InfluenceSpec(-1.0)
    with pytest.raises(ValueError):
        I.InfluenceSpec(1.0, alphas=(1e-4, 1e-2))


def test_excision_exact_against_holed_solve():
    met = M.cone_metric(1.0, lambda r, t: 0.3 * r * r * (1 + np.cos(2 * t)) / 2)
    m = M.polar_disk(1.0, 16, 32, met)
    inside = lambda c: np.hypot(c[:, 0] - 0.3, c[:, 1] - 0.1) < 0.25
    for z in (-1.0, 2.0 + 0.5j):
        e = I.excise_greens(m, inside, z)
        d = I.greens_with_hole(m, inside, z)
        assert np.linalg.norm(e.kernel - d.kernel) < 1e-10 * np.linalg.norm(d.kernel)
        assert e.symmetry_defect() < 1e-10


def test_phi_check_identity_and_mismatch():
    met = M.cone_metric(1.0, charts.HFunction("sinh"))
    m = M.polar_disk(1.0, 16, 32, met)
    holed, _ = M.excise(m, lambda c: np.hypot(c[:, 0], c[:, 1]) < 0.25)
    b = I.eig_bsp(holed, "hole", 10)
    ident = np.arange(b.n_gamma)
    assert I.phi_related_check(b, b, ident) == 0.0
    with pytest.raises(ValueError):
        I.phi_related_check(b, b, ident[::-1][:-1])


def test_truth_detection_on_cone():
    p = charts.ConicalPoint("p", 1 / 9, charts.HFunction("r2", 0.5), 1.0)
    m = M.cone_mesh(p, 1.0, 30, 48)
    rep = I.detect_singularities(m, "outer", [0.15, 0.2, 0.25, 0.3], stride=41)
    assert len(rep.detections) == 1
    det = rep.detections[0]
    assert det.node == 0 and det.n_hat == 3
    assert abs(det.t - 1.0) < 0.05


def test_truth_detection_smooth_disk():
    m = M.polar_disk(1.0, 30, 48, M.cone_metric(1.0))
    rep = I.detect_singularities(m, "outer", [0.15, 0.2, 0.25, 0.3], stride=41)
    assert rep.detections == ()
    assert all(abs(r.L - 1) < 0.1 for r in rep.records)


def test_detection_rejects_subgrid_radii():
    m = M.polar_disk(1.0, 10, 16)
    with pytest.raises(ValueError):
        I.detect_singularities(m, "outer", [0.01, 0.02, 0.03])
