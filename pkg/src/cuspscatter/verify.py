"""Quick self-checks, one small property per module; used by ``cuspscatter verify``."""

from __future__ import annotations

import math

import numpy as np

from . import charts, forward, freemodel, inverse, mesh, mobius, specfun
from .charts import EndSpec, SurfaceSpec


def _mobius(rng) -> float:
    worst = 0.0
    for _ in range(20):
        a, b, c = rng.normal(size=3)
        if abs(a) < 0.1:
            continue
        g = mobius.MoebiusTransform(a, b, c, (1 + b * c) / a)
        z = mobius.PointH(rng.normal(), 0.5 + rng.random())
        back = mobius.apply(mobius.inverse(g), mobius.apply(g, z))
        worst = max(worst, abs(back.z - z.z))
    return worst


def _bessel() -> float:
    x = np.linspace(0.1, 50, 60)
    worst = 0.0
    for nu in (0.3, 2j):
        I, K = specfun.bessel_I(nu, x), specfun.bessel_K(nu, x)
        dI, dK = specfun.bessel_I_deriv(nu, x), specfun.bessel_K_deriv(nu, x)
        w = I.value() * dK.value() - dI.value() * K.value()
        worst = max(worst, float(np.max(np.abs(w * x + 1))))
    return worst


def _parseval() -> float:
    grid = freemodel.LogGrid(0.05, 50.0, 4000)
    y = grid.y
    f = {0: freemodel.ModeFunction(0, grid, np.exp(-np.log(y) ** 2) + 0j),
         1: freemodel.ModeFunction(1, grid, y * np.exp(-y) + 0j)}
    return freemodel.parseval_defect(f, 1.0)


def _unitarity() -> float:
    surf = SurfaceSpec("free", (EndSpec("cusp", 1.0), EndSpec("regular", 1.0)), None)
    S = forward.physical_smatrix(forward.TruncatedProblem(surf, 1.0, n_max=3))
    return S.unitarity_defect()


def _cone_area() -> float:
    p = charts.ConicalPoint("p", 1 / 9, charts.HFunction("zero"), 0.5)
    r = 0.3
    exact = math.pi * math.sqrt(p.C) * r * r
    return abs(charts.ball_area(None, p, r) - exact) / exact


def _nd_symmetry() -> float:
    m = mesh.rectangle(1.0, 1.0, 30, 30)
    bsp = inverse.eig_bsp(m, ("bottom",), 20, keep_interior=False)
    return inverse.nd_map(bsp, -1.0).symmetry_defect()


def run_checks(seed: int = 0) -> list[tuple[str, str, float, float, bool]]:
    rng = np.random.default_rng(seed)
    rows = [
        ("mobius", "inverse round trip", _mobius(rng), 1e-12),
        ("specfun", "Wronskian relative error", _bessel(), 1e-9),
        ("freemodel", "Parseval defect", _parseval(), 1e-4),
        ("forward", "free unitarity defect", _unitarity(), 1e-8),
        ("charts", "cone ball area relative error", _cone_area(), 1e-8),
        ("inverse", "N-D kernel symmetry", _nd_symmetry(), 1e-10),
    ]
    return [(m, c, float(v), b, bool(v < b)) for m, c, v, b in rows]
