"""Command-line front end.

Every command writes whitespace-separated records preceded by ``#`` manifest
lines; with ``--out FILE`` a figure ``FILE.png`` is drawn next to the records.
Exit codes: 0 success, 1 tolerance violation, 2 bad input, 3 overflow guard.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import charts, forward, inverse, mobius, specfun
from .charts import SpecError
from .mesh import MeshInterior, mesh_distance, sublevel_area
from .report import figure_path, format_records, plot, write_output
from .specfile import load_surface, spec_hash

EXIT_OK, EXIT_TOL, EXIT_INPUT, EXIT_OVERFLOW = 0, 1, 2, 3


class InputError(Exception):
    pass


def _k_range(text: str) -> np.ndarray:
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"bad range {text!r}") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3 or vals[2] <= 0 or vals[1] < vals[0]:
        raise InputError("ranges are LO:HI:STEP with STEP > 0 and HI >= LO")
    lo, hi, st = vals
    n = int(math.floor((hi - lo) / st + 1e-9)) + 1
    return lo + st * np.arange(n)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"bad number list {text!r}") from None


def _manifest(args, command: str, extra: Sequence[tuple[str, object]] = ()) -> list[tuple[str, object]]:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "out", "spec")}
    head = [("command", command), ("version", __version__)]
    if getattr(args, "spec", None):
        head.append(("spec", f"{args.spec} sha256:{spec_hash(args.spec)}"))
    head.append(("params", " ".join(f"{k}={v}" for k, v in params.items())))
    return head + list(extra)


def _emit(args, command: str, columns, rows, extra=(), notes=(), kind: Optional[str] = None, title: str = ""):
    text = format_records(_manifest(args, command, extra), columns, rows, notes)
    write_output(text, args.out)
    fig = figure_path(args.out)
    if fig is not None and kind is not None and not args.no_plot:
        plot(fig, kind, columns, rows, title)


def _surface(args):
    if not args.spec:
        raise InputError("--spec is required")
    return load_surface(args.spec)


# ---------------------------------------------------------------------------
# commands

def cmd_classify(args) -> int:
    a, b, c, d = args.entries
    det = a * d - b * c
    if abs(det - 1) > 1e-6:
        print(f"error: determinant {det:.12g} is not 1", file=sys.stderr)
        return EXIT_INPUT
    g = mobius.MoebiusTransform(a, b, c, d)
    cls = mobius.classify(g)

    def show(p):
        return "∞" if p.value is None else f"{p.value + 0.0:.12g}"

    if cls.tag == "identity":
        line = "identity, fixes every point"
    elif cls.tag == "elliptic":
        z = mobius.fixed_points(g)
        order = mobius.elliptic_order(g)
        line = f"elliptic, fixed point {z.x + 0.0:.12g}{z.y:+.12g}i, order {order}"
    else:
        pts = mobius.fixed_points(g)
        word = "point" if len(pts) == 1 else "points"
        line = f"{cls.tag}, fixed {word} " + ", ".join(show(p) for p in pts)
    text = format_records(_manifest(args, "classify"), ["report"], [], [line])
    write_output(text if args.out else line + "\n", args.out)
    return EXIT_OK


def cmd_chart(args) -> int:
    n = args.n
    if n < 1:
        raise InputError("n must be >= 1")
    rows = []
    for rho in _k_range(args.rho):
        if not 0 <= rho < 1:
            raise InputError("rho must lie in [0, 1)")
        r = float(charts.cone_chart_r_from_rho(rho, n))
        g = charts.cone_metric_pullback(r, 0.0, n) if r > 0 else np.diag([1.0, 0.0])
        rows.append((rho, r, g[0, 0], g[1, 1]))
    _emit(args, "chart", ["rho", "r", "g_rr", "g_thth"], rows, kind="chart", title=f"cone chart n={n}")
    return EXIT_OK


def cmd_bessel(args) -> int:
    try:
        nu = complex(args.nu.replace("i", "j"))
    except ValueError:
        raise InputError(f"bad order {args.nu!r}") from None
    xs = _k_range(args.x)
    if np.any(xs <= 0):
        raise InputError("x must be positive")
    I = specfun.bessel_I(nu, xs)
    K = specfun.bessel_K(nu, xs)
    dI = specfun.bessel_I_deriv(nu, xs)
    dK = specfun.bessel_K_deriv(nu, xs)
    # Wronskian I K' - I' K = -1/x, formed in scaled arithmetic
    s = I.log_scale + K.log_scale
    w = (I.mantissa * dK.mantissa * np.exp(I.log_scale + dK.log_scale - s)
         - dI.mantissa * K.mantissa * np.exp(dI.log_scale + K.log_scale - s))
    err = np.abs(w * np.exp(s) * xs + 1)
    rows = [(x, I.mantissa[i].real, I.mantissa[i].imag, I.log_scale[i],
             K.mantissa[i].real, K.mantissa[i].imag, K.log_scale[i], err[i]) for i, x in enumerate(xs)]
    worst = float(err.max())
    _emit(args, "bessel", ["x", "re_I", "im_I", "logscale_I", "re_K", "im_K", "logscale_K", "wronskian_err"],
          rows, [("achieved", f"max_wronskian_err={worst:.3e}")], kind="bessel", title=f"nu = {nu}")
    return EXIT_TOL if worst > args.tol else EXIT_OK


def cmd_smatrix(args) -> int:
    surf = _surface(args)
    rows, worst = [], 0.0
    for k in _k_range(args.k):
        prob = forward.TruncatedProblem(surf, float(k), args.Y, args.ymin, args.backend, args.nmax)
        try:
            S = forward.physical_smatrix(prob)
        except (forward.NearResonanceError, np.linalg.LinAlgError):
            chans = forward._channels(args.nmax)
            rows += [(k, j, l, m, n, float("nan"), float("nan"), float("nan"), 1)
                     for (j, m) in chans for (l, n) in chans]
            continue
        worst = max(worst, S.unitarity_defect())
        rows += [r + (0,) for r in S.records()]
    _emit(args, "smatrix", ["k", "j", "l", "m", "n", "re", "im", "defect", "near_resonant"], rows,
          [("achieved", f"max_unitarity_defect={worst:.3e}")], kind="smatrix", title=f"{surf.name} phases")
    return EXIT_TOL if worst > args.tol else EXIT_OK


def _read_a(path: str) -> dict[int, complex]:
    a: dict[int, complex] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                n = int(parts[0])
                re = float(parts[1])
                im = float(parts[2]) if len(parts) > 2 else 0.0
            except (ValueError, IndexError):
                raise InputError(f"{path}: line {ln}: expected 'n re [im]'") from None
            a[n] = complex(re, im)
    return a


def cmd_gsmatrix(args) -> int:
    surf = _surface(args)
    a = _read_a(args.afile)
    k = float(args.k)
    cols = ["k", "n", "re_a", "im_a", "re_b", "im_b", "scale_exp"]
    if not a:
        _emit(args, "gsmatrix", cols, [], kind=None)
        return EXIT_OK
    nmax = max(args.nmax, max(abs(n) for n in a))
    prob = forward.TruncatedProblem(surf, k, args.Y, args.ymin, "mode", nmax)
    try:
        data = forward.generalized_smatrix_apply(prob, a)
    except forward.OverflowGuardError as e:
        print(f"error: {e}; max safe N = {e.max_safe_n} for k = {k}, Y = {args.Y}", file=sys.stderr)
        return EXIT_OVERFLOW
    ratio = data.b_norm_ratio()
    _emit(args, "gsmatrix", cols, data.records(), [("achieved", f"b_over_a={ratio:.3e}")],
          kind="gsmatrix", title=f"{surf.name} generalized S, k = {k}")
    return EXIT_OK


def _mesh_interior(surf) -> MeshInterior:
    if not isinstance(surf.interior, MeshInterior):
        raise InputError("this command needs a mesh interior ([interior] type = mesh, disk, strip or patch)")
    return surf.interior


def _auto_modes(mesh, requested: Optional[int], nyquist: float = 0.5) -> int:
    """Mode count: the request, or a Weyl estimate of the modes the mesh resolves."""
    if requested is not None:
        return requested
    lam = nyquist / mesh.h ** 2
    perim = sum(float(np.sum(v)) for v in mesh.edge_len.values())
    n = (mesh.total_area * lam + perim * math.sqrt(lam)) / (4 * math.pi)
    return max(10, min(150, int(0.9 * n)))


def _gamma(args, interior: MeshInterior) -> tuple[str, ...]:
    return tuple(args.gamma.split(",")) if args.gamma else interior.gamma


def cmd_bsp(args) -> int:
    interior = _mesh_interior(_surface(args))
    mesh = interior.build()
    bsp = inverse.eig_bsp(mesh, _gamma(args, interior), _auto_modes(mesh, args.neigs), keep_interior=False)
    if args.archive:
        bsp.save(args.archive, text=args.text_archive)
    mult = {i: len(g) for g in bsp.groups for i in g}
    rows = [(i, lam, mult[i], float(np.sum(bsp.weights * bsp.traces[i] ** 2)))
            for i, lam in enumerate(bsp.eigenvalues)]
    _emit(args, "bsp", ["index", "lambda", "multiplicity", "trace_energy"], rows,
          [("mesh", f"{mesh.n_nodes} nodes, h={mesh.h:.4g}")], kind="bsp", title="eigenvalues")
    return EXIT_OK


def cmd_ndmap(args) -> int:
    interior = _mesh_interior(_surface(args))
    mesh = interior.build()
    gamma = _gamma(args, interior)
    try:
        z = complex(args.z.replace("i", "j"))
    except ValueError:
        raise InputError(f"bad z {args.z!r}") from None
    bsp = inverse.eig_bsp(mesh, gamma, _auto_modes(mesh, args.neigs), keep_interior=False)
    L = inverse.nd_map(bsp, z)
    D = inverse.nd_map_direct(mesh, gamma, z)
    diff = float(np.abs(L.kernel - D.kernel).max() / np.abs(D.kernel).max())
    K = L.kernel
    rows = [(i, j, bsp.arclength[i], bsp.arclength[j], float(np.real(K[i, j])), float(np.imag(K[i, j])))
            for i in range(K.shape[0]) for j in range(K.shape[1])]
    _emit(args, "ndmap", ["i", "j", "s_i", "s_j", "re", "im"], rows,
          [("achieved", f"spectral_vs_direct={diff:.3e} symmetry={L.symmetry_defect():.3e} tail={L.tail:.3e}")],
          kind="ndmap", title=f"N-D kernel z = {z}")
    return EXIT_OK


def cmd_volume(args) -> int:
    surf = _surface(args)
    radii = sorted(_floats(args.radii))
    if len(radii) < 3 or radii[0] <= 0:
        raise InputError("need at least three positive radii")
    if args.cone:
        p = surf.cone(args.cone)
        areas = [(r, charts.ball_area(surf, p, r)) for r in radii]
    else:
        interior = _mesh_interior(surf)
        mesh = interior.build()
        centre = np.array(_floats(args.center)) if args.center else np.zeros(2)
        node = int(np.argmin(np.linalg.norm(mesh.points - centre[None, :], axis=1)))
        areas = inverse.ball_areas_truth(mesh, node, radii)
    L, C_hat, n_hat = charts.cone_constant_estimate(areas)
    rows = [(r, a, a / (math.pi * r * r)) for r, a in areas]
    _emit(args, "volume", ["r", "area", "ratio"], rows,
          [("estimate", f"L={L:.8g} C_hat={C_hat:.8g} n_hat={n_hat}")], kind="volume", title="ball areas")
    return EXIT_OK


def cmd_invert(args) -> int:
    surf = _surface(args)
    interior = _mesh_interior(surf)
    Ts = _floats(args.T)
    if not Ts or any(t <= 0 for t in Ts) or any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise InputError("the T ladder must be positive and strictly increasing")
    radii = _floats(args.radii) if args.radii else []
    if radii and any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("the radius ladder must be strictly increasing")
    mesh = interior.build()
    gamma = _gamma(args, interior)
    bsp = inverse.eig_bsp(mesh, gamma, _auto_modes(mesh, args.neigs), keep_interior=False)
    d = mesh_distance(mesh, mesh.boundary_nodes(gamma))
    rows, notes, worst = [], [], 0.0
    for T in Ts:
        spec = inverse.InfluenceSpec(T, n_space=args.nspace, closed=interior.kind in ("disk", "mesh"))
        res = inverse.influence_area(bsp, spec)
        meas = sublevel_area(mesh, d, T)
        rows.append((T, res.area, res.alpha_used, res.iters, inverse.time_resolution(bsp, spec), meas))
    if radii:
        rep = inverse.detect_singularities(mesh, gamma, radii, mode=args.mode, stride=args.stride,
                                           n_eigs=args.neigs or 150)
        if not rep.detections:
            notes.append("no singular points detected")
        for det in rep.detections:
            n_txt = det.n_hat if det.n_hat is not None else "?"
            notes.append(f"cone: n={n_txt} L={det.L:.6g} C_hat={det.C_hat:.6g} "
                         f"Y={det.Y:.6g} t={det.t:.6g} at ({det.point[0]:.6g}, {det.point[1]:.6g})")
    _emit(args, "invert", ["T", "area_estimate", "alpha_used", "iters", "n_time", "mesh_area"], rows,
          [("mesh", f"{mesh.n_nodes} nodes, h={mesh.h:.4g}, gamma={','.join(gamma)}")], notes,
          kind="invert", title=f"{surf.name} domains of influence")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks
    rows = run_checks(seed=args.seed)
    text = format_records(_manifest(args, "verify"), ["module", "check", "value", "bound", "status"],
                          [(m, c, v, b, "pass" if ok else "FAIL") for m, c, v, b, ok in rows])
    write_output(text, args.out)
    return EXIT_OK if all(r[4] for r in rows) else EXIT_TOL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="surface description file")
    common.add_argument("--out", help="record file (default stdout); a .png figure is written beside it")
    common.add_argument("--tol", type=float, default=1e-6, help="fatal tolerance for the checked quantity")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--no-plot", action="store_true", help="skip the figure")

    p = argparse.ArgumentParser(prog="cuspscatter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify", parents=[common], help="classify a Moebius transformation")
    s.add_argument("entries", type=float, nargs=4, metavar=("A", "B", "C", "D"))
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("chart", parents=[common], help="cone chart radius and metric")
    s.add_argument("n", type=int)
    s.add_argument("--rho", default="0:0.9:0.1", help="LO:HI:STEP")
    s.set_defaults(func=cmd_chart)

    s = sub.add_parser("bessel", parents=[common], help="scaled I and K of complex order")
    s.add_argument("nu", help="order, e.g. 0.5 or 2i")
    s.add_argument("--x", default="0.1:50:0.5", help="LO:HI:STEP")
    s.set_defaults(func=cmd_bessel)

    for name, fn, hlp in (("smatrix", cmd_smatrix, "physical S-matrix over a k range"),
                          ("gsmatrix", cmd_gsmatrix, "generalized S-matrix applied to an a-vector")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--k", default="1" if name == "gsmatrix" else "0.5:2:0.5")
        s.add_argument("--backend", choices=("mode", "fem"), default="mode")
        s.add_argument("--nmax", type=int, default=4)
        s.add_argument("--Y", type=float, default=4.0)
        s.add_argument("--ymin", type=float, default=0.25)
        if name == "gsmatrix":
            s.add_argument("afile", help="file of 'n re im' rows")
        s.set_defaults(func=fn)

    for name, fn, hlp in (("bsp", cmd_bsp, "boundary spectral projection"),
                          ("ndmap", cmd_ndmap, "Neumann-to-Dirichlet kernel"),
                          ("invert", cmd_invert, "domain-of-influence areas and cone detection")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--gamma", help="comma-separated boundary tags")
        s.add_argument("--neigs", type=int, help="number of eigenpairs (default: what the mesh resolves, at most 150)")
        if name == "bsp":
            s.add_argument("--archive", help="write the BSP archive here")
            s.add_argument("--text-archive", action="store_true")
        if name == "ndmap":
            s.add_argument("--z", default="-1")
        if name == "invert":
            s.add_argument("--T", required=True, help="comma-separated increasing times")
            s.add_argument("--radii", help="comma-separated increasing radii for cone detection")
            s.add_argument("--mode", choices=("truth", "blind"), default="truth")
            s.add_argument("--stride", type=int, default=37)
            s.add_argument("--nspace", type=int, default=3)
        s.set_defaults(func=fn)

    s = sub.add_parser("volume", parents=[common], help="geodesic ball areas and the cone constant")
    s.add_argument("--radii", required=True)
    s.add_argument("--cone", help="cone label (polar quadrature); otherwise mesh distances")
    s.add_argument("--center", help="chart point for mesh balls")
    s.set_defaults(func=cmd_volume)

    s = sub.add_parser("verify", parents=[common], help="quick property checks of every module")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    start = time.perf_counter()
    try:
        code = args.func(args)
    except SpecError as e:
        print(f"error: {args.spec}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except forward.OverflowGuardError as e:
        print(f"error: {e}; max safe N = {e.max_safe_n}", file=sys.stderr)
        return EXIT_OVERFLOW
    # wall time goes to stderr so record files stay byte-identical across reruns
    print(f"# wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
