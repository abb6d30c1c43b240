import math

import numpy as np
import pytest

from cuspscatter import forward
from cuspscatter.charts import EndSpec, SpecError, SurfaceSpec, WarpedProfile
from cuspscatter.forward import TruncatedProblem


def _surface(amp=None, angular=0.0):
    prof = None if amp is None else WarpedProfile.bump(1.0, amp, 0.3, 0.8, angular_amplitude=angular,
                                                       angular_mode=2 if angular else 0)
    return SurfaceSpec("t", (EndSpec("cusp", 1.0), EndSpec("regular", 1.0)), prof)


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


@pytest.mark.parametrize("k", [0.7, 1.3, 2.9])
def test_free_regular_phases(k):
    S = forward.physical_smatrix(TruncatedProblem(_surface(), k, n_max=4))
    for n in (1, 2, 3, 4):
        v = S.entry((2, n), (2, n))
        assert abs(abs(v) - 1) < 1e-10
        assert abs(_wrap(np.angle(v) + 2 * k * math.log(n / 2))) < 1e-8
        assert S.entry((2, -n), (2, -n)) == v


def test_free_offdiagonal_vanishes():
    S = forward.physical_smatrix(TruncatedProblem(_surface(), 1.1, n_max=3))
    M = S.matrix.copy()
    # the cusp channel and the regular zero mode exchange all their flux
    for c in ((1, 0), (2, 0)):
        M[S.channels.index(c), :] = 0
    np.fill_diagonal(M, 0)
    assert np.max(np.abs(M)) < 1e-12
    assert abs(abs(S.entry((2, 0), (1, 0))) ** 2 - 2 * math.pi + 2 * math.pi * abs(S.entry((1, 0), (1, 0))) ** 2) < 1e-9


@pytest.mark.parametrize("k", [0.6, 1.3, 2.4])
def test_warped_unitarity(k):
    S = forward.physical_smatrix(TruncatedProblem(_surface(0.4), k, n_max=6))
    assert S.unitarity_defect() < 1e-8


def test_truncation_heights_do_not_matter():
    a = forward.physical_smatrix(TruncatedProblem(_surface(0.4), 1.3, Y=4.0, y_min=0.25, n_max=3)).matrix
    b = forward.physical_smatrix(TruncatedProblem(_surface(0.4), 1.3, Y=9.0, y_min=0.1, n_max=3)).matrix
    assert np.max(np.abs(a - b)) < 1e-8


def test_fem_converges_to_mode_solution():
    # P1 angular dispersion is second order in the sector count
    surf = _surface(0.4)
    ref = forward.physical_smatrix(TruncatedProblem(surf, 1.3, n_max=2)).entry((2, 2), (2, 2))
    errs = []
    for nth in (16, 32):
        S = forward.physical_smatrix(TruncatedProblem(surf, 1.3, n_max=2, backend="fem", fem_ntheta=nth))
        errs.append(abs(S.entry((2, 2), (2, 2)) - ref))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_fem_handles_angular_perturbation():
    S = forward.physical_smatrix(TruncatedProblem(_surface(0.3, angular=0.2), 1.0, n_max=2, backend="fem"))
    assert S.unitarity_defect() < 5e-2


def test_generalized_free_null():
    rng = np.random.default_rng(1)
    a = {n: complex(*rng.normal(size=2)) for n in range(-5, 6)}
    data = forward.generalized_smatrix_apply(TruncatedProblem(_surface(), 1.2, n_max=5), a)
    assert data.b_norm_ratio() == 0.0


def test_generalized_linear_on_warped():
    prob = TruncatedProblem(_surface(0.4), 1.2, n_max=4)
    a1 = {n: 1.0 + 0.1j * n for n in range(-4, 5)}
    a2 = {n: 0.5 - 0.3 * n for n in range(-4, 5)}
    d1 = forward.generalized_smatrix_apply(prob, a1)
    d2 = forward.generalized_smatrix_apply(prob, a2)
    d3 = forward.generalized_smatrix_apply(prob, {n: 2 * a1[n] - a2[n] for n in a1})
    for n in a1:
        want = 2 * d1.b(n) - d2.b(n)
        assert abs(d3.b(n) - want) <= 1e-10 * max(1.0, abs(want))


def test_overflow_guard():
    prob = TruncatedProblem(_surface(), 1.0, Y=4.0, n_max=400)
    with pytest.raises(forward.OverflowGuardError) as err:
        forward.generalized_smatrix_apply(prob, {400: 1.0})
    assert err.value.max_safe_n == forward.max_safe_mode(1.0, 4.0, 1.0)


def test_ndmap_matches_generalized_data():
    prob = TruncatedProblem(_surface(0.4), 1.3, n_max=4)
    assert forward.gen_smatrix_vs_ndmap(prob, 3.5) < 1e-8
    # a different frequency in the N-D map breaks the agreement
    assert forward.gen_smatrix_vs_ndmap(prob, 3.5, k_nd=1.4) > 1e-3


def test_free_ndmap_zero_mode():
    prob = TruncatedProblem(_surface(), 1.3, n_max=2)
    assert abs(forward.mode_ndmap(prob, 0, 3.0) - 1 / (0.5 - 1.3j)) < 1e-10


def test_problem_validation():
    with pytest.raises(ValueError):
        TruncatedProblem(_surface(), -1.0)
    with pytest.raises(ValueError):
        TruncatedProblem(_surface(), 1.0, Y=1.5)
    with pytest.raises(SpecError):
        TruncatedProblem(SurfaceSpec("x", (EndSpec("cusp", 1.0),), None), 1.0)
    with pytest.raises(ValueError):
        TruncatedProblem(_surface(0.3, angular=0.2), 1.0, backend="mode")
