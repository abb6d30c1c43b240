"""Acceptance suite: ten end-to-end checks, each reported as one PASS/FAIL line.

Run with pytest (the lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from cuspscatter import charts, forward, freemodel as fm, inverse as I, mesh as M, specfun
from cuspscatter.charts import ConicalPoint, EndSpec, HFunction, SurfaceSpec, WarpedProfile
from cuspscatter.forward import TruncatedProblem

RESULTS: list[str] = []


def report(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {num:2d} {title}: {detail}"
    RESULTS.append(line)
    assert ok, line


def _cylinder(amp=None):
    prof = None if amp is None else WarpedProfile.bump(1.0, amp, 0.3, 0.8)
    return SurfaceSpec("c", (EndSpec("cusp", 1.0), EndSpec("regular", 1.0)), prof)


def _bump(y, center=0.0, width=math.log(2)):
    x = (np.log(y) - center) / width
    out = np.zeros_like(y)
    m = np.abs(x) < 0.999
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


def _scaled(sb, ref):
    return sb.mantissa * np.exp(sb.log_scale - ref)


# ---------------------------------------------------------------------------

def test_01_bessel():
    x = np.linspace(0.1, 50, 200)
    wr = ode = 0.0
    for nu in (0.3, 1.7, 0.5j, 2j, 5j):
        I_, K = specfun.bessel_I(nu, x), specfun.bessel_K(nu, x)
        dI, dK = specfun.bessel_I_deriv(nu, x), specfun.bessel_K_deriv(nu, x)
        s = I_.log_scale + K.log_scale
        w = (I_.mantissa * dK.mantissa * np.exp(I_.log_scale + dK.log_scale - s)
             - dI.mantissa * K.mantissa * np.exp(dI.log_scale + K.log_scale - s))
        wr = max(wr, float(np.max(np.abs(w * np.exp(s) * x + 1))))
        # x^2 w'' + x w' - (x^2 + nu^2) w = 0, w'' by a five-point stencil on w'
        for fn, dfn in ((specfun.bessel_I, specfun.bessel_I_deriv), (specfun.bessel_K, specfun.bessel_K_deriv)):
            h = 1e-3
            c = fn(nu, x)
            ref = c.log_scale
            w0 = _scaled(c, ref)
            d0 = _scaled(dfn(nu, x), ref)
            dp = [_scaled(dfn(nu, x + j * h), ref) for j in (-2, -1, 1, 2)]
            d2 = (dp[0] - 8 * dp[1] + 8 * dp[2] - dp[3]) / (12 * h)
            res = x * x * d2 + x * d0 - (x * x + nu * nu) * w0
            size = np.abs(x * x * d2) + np.abs(x * d0) + np.abs((x * x + nu * nu) * w0)
            ode = max(ode, float(np.max(np.abs(res) / size)))
    imk = 0.0
    for k in (0.5, 2.0, 5.0):
        Km = specfun.bessel_K(1j * k, x).mantissa
        imk = max(imk, float(np.max(np.abs(Km.imag) / np.abs(Km))))
    report(1, "Bessel suite", wr < 1e-9 and ode < 1e-6 and imk < 1e-12,
           f"Wronskian {wr:.2e} (<1e-9), ODE residual {ode:.2e} (<1e-6), Im K {imk:.2e} (<1e-12)")


def test_02_parseval():
    defects = {}
    for k in (0.5, 1.0, 3.0):
        g = fm.LogGrid(1e-3, 1e3, 10000)
        defects[k] = fm.parseval_defect({0: fm.ModeFunction(0, g, _bump(g.y) + 0j)}, k)
    ladder = []
    for N in (2500, 5000, 10000):
        g = fm.LogGrid(1e-3, 1e3, N)
        ladder.append(fm.parseval_defect({0: fm.ModeFunction(0, g, _bump(g.y) + 0j)}, 1.0))
    rates = [math.log2(a / b) for a, b in zip(ladder, ladder[1:])]
    ok = max(defects.values()) < 1e-6 and all(abs(r - 2) < 0.2 for r in rates)
    report(2, "free-model Parseval", ok,
           "defects " + ", ".join(f"k={k}: {v:.2e}" for k, v in defects.items())
           + " (<1e-6); refinement rates " + ", ".join(f"{r:.2f}" for r in rates) + " (2)")


def test_03_asymptotics():
    g = fm.LogGrid(1e-3, 1e3, 20001)
    y = g.y
    sources = [
        {0: fm.ModeFunction(0, g, _bump(y) + 0j)},
        {n: fm.ModeFunction(n, g, _bump(y, 0.4, 0.8) * (1 + 0.5j * n) + 0j) for n in (0, 1, -1, 2)},
        {n: fm.ModeFunction(n, g, _bump(y, -0.3, 0.5) * np.cos(3 * np.log(y)) / (1 + n * n) + 0j)
         for n in (0, 3)},
    ]
    worst_coef, mono = 0.0, True
    for f in sources:
        for k in (0.7, 2.0):
            for end in ("cusp", "regular"):
                p = fm.asymptotic_profile(f, k, end)
                mono &= all(b < a for a, b in zip(p.residuals, p.residuals[1:]))
                if end == "cusp":
                    worst_coef = max(worst_coef, p.coefficient_error)
    report(3, "free asymptotics", mono and worst_coef < 1e-4,
           f"residuals monotone over R=10,100,1000: {mono}; cusp coefficient rel. err {worst_coef:.2e} (<1e-4)")


def test_04_unitarity():
    ks = np.linspace(0.4, 3.1, 10)
    worst = max(forward.physical_smatrix(TruncatedProblem(_cylinder(0.4), float(k), n_max=6)).unitarity_defect()
                for k in ks)
    mod = ph = 0.0
    for k in (0.7, 1.9, 3.1):
        S = forward.physical_smatrix(TruncatedProblem(_cylinder(), k, n_max=6))
        for n in range(1, 7):
            v = S.entry((2, n), (2, n))
            mod = max(mod, abs(abs(v) - 1))
            d = np.angle(v) + 2 * k * math.log(n / 2)
            ph = max(ph, abs((d + math.pi) % (2 * math.pi) - math.pi))
    report(4, "S-matrix unitarity", worst < 1e-6 and mod < 1e-8 and ph < 1e-6,
           f"warped defect {worst:.2e} over 10 k (<1e-6); free |S_nn|-1 {mod:.2e} (<1e-8), phase err {ph:.2e} (<1e-6)")


def test_05_generalized_null():
    rng = np.random.default_rng(5)
    free = TruncatedProblem(_cylinder(), 1.3, n_max=8)
    ratio = lin = trunc = 0.0
    for _ in range(5):
        support = rng.choice(np.arange(-8, 9), size=rng.integers(2, 10), replace=False)
        a = {int(n): complex(*rng.normal(size=2)) for n in support}
        ratio = max(ratio, forward.generalized_smatrix_apply(free, a).b_norm_ratio())
    # linearity and truncation height on the warped cylinder as well as the free one
    for surf in (_cylinder(), _cylinder(0.4)):
        prob = TruncatedProblem(surf, 1.3, n_max=8)
        a1 = {n: complex(*rng.normal(size=2)) for n in range(-8, 9)}
        a2 = {n: complex(*rng.normal(size=2)) for n in range(-8, 9)}
        c1, c2 = 0.7 - 0.2j, -1.3
        d1 = forward.generalized_smatrix_apply(prob, a1)
        d2 = forward.generalized_smatrix_apply(prob, a2)
        d3 = forward.generalized_smatrix_apply(prob, {n: c1 * a1[n] + c2 * a2[n] for n in a1})
        for n in a1:
            want = c1 * d1.b(n) + c2 * d2.b(n)
            lin = max(lin, abs(d3.b(n) - want) / max(abs(want), 1.0))
        far = forward.generalized_smatrix_apply(TruncatedProblem(surf, 1.3, Y=8.0, n_max=8), a1)
        for n in a1:
            trunc = max(trunc, abs(far.b(n) - d1.b(n)) / max(abs(d1.b(n)), 1e-300))
    report(5, "generalized S null test", ratio < 1e-8 and lin < 1e-10 and trunc < 1e-6,
           f"free ||b||/||a|| {ratio:.2e} (<1e-8); linearity {lin:.2e} (<1e-10); Y->2Y {trunc:.2e} (<1e-6)")


def test_06_ndmap_consistency():
    worst = max(forward.gen_smatrix_vs_ndmap(TruncatedProblem(_cylinder(0.4), k, n_max=6), 3.5)
                for k in (0.7, 1.3, 2.1))
    report(6, "generalized data vs N-D map", worst < 1e-6, f"max trace mismatch {worst:.2e} (<1e-6) at k=0.7,1.3,2.1")


def test_07_blagovestchenskii():
    m = M.warped_patch(1.0, 1.0, 70, 70, lambda s: 1 + 0.5 * s)
    gamma = ("bottom", "right")
    bsp = I.eig_bsp(m, gamma, 60)
    rng = np.random.default_rng(7)
    worst = 0.0
    S = I.boundary_modes(bsp, 4)
    for j in range(20):
        kind = ("pc", "sine", "legendre")[j % 3]
        T1, T2 = rng.uniform(0.5, 2, 2)
        f = I.Source(S, I.TimeBasis(kind, T1, 5), rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
        h = I.Source(S, I.TimeBasis("pc", T2, 4), rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        t, s = rng.uniform(0.3, 2.5, 2)
        a = I.blago_inner(bsp, f, h, t, s)
        d = I.blago_inner_direct(bsp, m, gamma, f, h, t, s)
        worst = max(worst, abs(a - d) / abs(d))
    report(7, "Blagovestchenskii identity", m.n_nodes >= 5000 and bsp.n_eigs == 60 and worst < 1e-10,
           f"{m.n_nodes} nodes, {bsp.n_eigs} modes, 20 pairs: max rel. err {worst:.2e} (<1e-10)")


def test_08_influence_areas():
    Ts = (0.3, 0.4, 0.5, 0.7)
    parts, ok = [], True
    for name, m in (("strip", M.rectangle(0.1, 1.0, 20, 200)),
                    ("warped", M.warped_patch(0.1, 1.0, 20, 200, lambda s: 1 + 0.8 * s * s))):
        bsp = I.eig_bsp(m, "bottom", 140, keep_interior=False)
        d = M.mesh_distance(m, m.boundary_nodes("bottom"))
        ratios = []
        for T in Ts:
            res = I.influence_area(bsp, I.InfluenceSpec(T, n_space=3))
            true = M.sublevel_area(m, d, T)
            ratios.append(res.area / true)
            # lower bound along the whole minimising ladder
            ok &= all(v <= true * (1 + 1e-9) for _, v in res.ladder)
        ok &= all(abs(r - 1) < 0.05 for r in ratios)
        parts.append(f"{name} " + "/".join(f"{r:.3f}" for r in ratios))
    report(8, "domain-of-influence areas", ok, "; ".join(parts) + " (within 5%, never above)")


def test_09_cone_recognition():
    radii = [0.3, 0.4, 0.5, 0.6]
    parts, ok = [], True
    for n in (1, 2, 3, 4):
        p = ConicalPoint("p", 1 / n ** 2, HFunction("r2", 0.5), 1.0)
        m = M.cone_mesh(p, 0.7, 64, 96)
        Lt, _, nt = charts.cone_constant_estimate(I.ball_areas_truth(m, 0, radii))
        Lb, _, nb = charts.cone_constant_estimate(I.ball_areas_blind(m, 0, radii, eps=0.1, n_eigs=150),
                                                  snap=0.5, degree=0)
        ok &= nt == n and nb == n
        if n > 1:
            ok &= abs(Lt * n - 1) < 0.02 and abs(Lb * n - 1) < 0.10
        parts.append(f"n={n}: L {Lt:.4f}/{Lb:.4f} n_hat {nt}/{nb}")
    report(9, "cone recognition (truth/blind)", ok, "; ".join(parts))


def test_10_excision_and_phi():
    met = M.cone_metric(1.0, lambda r, t: 0.3 * r * r * (1 + np.cos(2 * t)) / 2)
    m = M.polar_disk(1.0, 30, 64, met)
    inside = lambda c: np.hypot(c[:, 0] - 0.3, c[:, 1] - 0.1) < 0.2
    exc = 0.0
    for z in (-1.0, 2.0 + 0.5j, 10.0 + 1j):
        e = I.excise_greens(m, inside, z)
        d = I.greens_with_hole(m, inside, z)
        exc = max(exc, float(np.linalg.norm(e.kernel - d.kernel) / np.linalg.norm(d.kernel)))

    metric = M.cone_metric(1.0, HFunction("sinh"))
    base = M.polar_disk(1.0, 30, 64, metric)
    h1, _ = M.excise(base, lambda c: np.hypot(c[:, 0], c[:, 1]) < 0.25)
    b1 = I.eig_bsp(h1, "hole", 40)
    n1 = h1.boundary_nodes("hole")
    iso = 0.0
    for k, seed in ((5, 1), (17, 2)):
        ang = 2 * np.pi * k / 64
        R = np.array([[np.cos(ang), np.sin(ang)], [-np.sin(ang), np.cos(ang)]])
        perm = np.random.default_rng(seed).permutation(h1.n_nodes)
        h2, perm = M.remap(h1, lambda P: P @ R, perm, metric=metric)
        b2 = I.eig_bsp(h2, "hole", 40)
        pos = {v: i for i, v in enumerate(h2.boundary_nodes("hole"))}
        iso = max(iso, I.phi_related_check(b1, b2, np.array([pos[perm[v]] for v in n1])))
    bump = lambda P: metric(P) * (1 + 0.01 * np.maximum(0, 1 - ((np.hypot(P[:, 0], P[:, 1]) - 0.65) / 0.2) ** 2) ** 2)[:, None, None]
    h3, _ = M.remap(h1, lambda P: P, None, metric=bump)
    ctrl = I.phi_related_check(b1, I.eig_bsp(h3, "hole", 40), np.arange(len(n1)))
    report(10, "excision and Phi-relatedness", exc < 1e-3 and iso < 1e-6 and ctrl > 1e-3,
           f"excise vs holed solve {exc:.2e} (<1e-3); isometric {iso:.2e} (<1e-6); 1% control {ctrl:.2e} (>1e-3)")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    print("\n".join(RESULTS))
    sys.exit(1 if failed else 0)
