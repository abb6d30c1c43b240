"""Surface data model, coordinate charts and metric queries.

A surface is a compact core (a warped profile or a triangle mesh) with cusp
and regular ends attached, plus conical points carrying a cone constant C_p
and a decaying perturbation h_p.  Geodesic balls are measured in geodesic
polar coordinates and the cone constant is recovered from the small-radius
limit of area / (pi r^2), which equals sqrt(C_p).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

__all__ = [
    "SpecError",
    "HFunction",
    "ConicalPoint",
    "EndPerturbation",
    "EndSpec",
    "WarpedProfile",
    "SurfaceSpec",
    "ChartPoint",
    "cone_chart_r_from_rho",
    "cone_chart_rho_from_r",
    "cone_metric_pullback",
    "zeta_pullback_factor",
    "funnel_metric",
    "metric_at",
    "ball_area",
    "polar_ball_area",
    "cone_constant_estimate",
]


class SpecError(ValueError):
    """Invalid surface data; ``line`` points into the spec file when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# conical points

@dataclass(frozen=True)
class HFunction:
    """Perturbation h_p(r, theta) of a cone metric.

    ``kind`` is one of ``zero``, ``rcos`` (amp * r * cos theta),
    ``r2`` (amp * r^2 * (1 + cos 2 theta)/2), ``sinh`` (the hyperbolic model
    cone, 1 + h = sinh^2 r / r^2) or ``table`` (bilinear on a (log r, theta)
    grid).
    """

    kind: str = "zero"
    amp: float = 0.0
    log_r: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "rcos", "r2", "sinh", "table"):
            raise SpecError(f"unknown h kind {self.kind!r}")
        if self.kind == "table":
            if self.log_r is None or self.theta is None or self.values is None:
                raise SpecError("tabulated h needs log_r, theta and values")
            if self.values.shape != (len(self.log_r), len(self.theta)):
                raise SpecError("h table shape does not match its grid")

    def __call__(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(r, theta).shape)
        if self.kind == "rcos":
            return self.amp * r * np.cos(theta)
        if self.kind == "sinh":
            rr = np.maximum(r, 1e-300)
            out = np.where(r < 1e-4, r ** 2 / 3 + 2 * r ** 4 / 45,
                           np.sinh(rr) ** 2 / rr ** 2 - 1.0)
            return out + 0 * theta
        if self.kind == "r2":
            return self.amp * r ** 2 * 0.5 * (1 + np.cos(2 * theta))
        interp = RegularGridInterpolator((self.log_r, self.theta), self.values,
                                         bounds_error=False, fill_value=None)
        lr = np.clip(np.log(np.maximum(r, 1e-300)), self.log_r[0], self.log_r[-1])
        th = np.mod(theta, 2 * np.pi)
        lr, th = np.broadcast_arrays(lr, th)
        out = interp(np.stack([lr.ravel(), th.ravel()], axis=-1)).reshape(lr.shape)
        # below the table the perturbation is continued by zero decay
        return np.where(np.log(np.maximum(r, 1e-300)) < self.log_r[0],
                        out * r / math.exp(self.log_r[0]), out)


@dataclass(frozen=True)
class ConicalPoint:
    """Cone point with metric dr^2 + C r^2 (1 + h(r, theta)) dtheta^2 for r < epsilon."""

    label: str
    C: float
    h: HFunction = field(default_factory=HFunction)
    epsilon: float = 0.5
    center: tuple[float, float] = (0.0, 0.0)
    orbifold: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise SpecError(f"cone {self.label}: C must be positive")
        if not self.epsilon > 0:
            raise SpecError(f"cone {self.label}: epsilon must be positive")
        if self.orbifold:
            n = round(1.0 / math.sqrt(self.C))
            if n < 2 or abs(self.C - 1.0 / n ** 2) > 1e-12:
                raise SpecError(f"cone {self.label}: orbifold points need C = 1/n^2, n >= 2")
        th = np.linspace(0, 2 * np.pi, 65)
        r0 = 1e-4 * self.epsilon
        if self.h.kind == "table":
            r0 = math.exp(self.h.log_r[0])
        if np.max(np.abs(self.h(r0, th))) >= 1e-3:
            raise SpecError(f"cone {self.label}: h does not vanish as r -> 0")
        if np.min(1 + self.h(np.linspace(1e-6, self.epsilon, 50)[:, None], th[None, :])) <= 0:
            raise SpecError(f"cone {self.label}: 1 + h must stay positive")

    @property
    def n_orbifold(self) -> Optional[int]:
        n = round(1.0 / math.sqrt(self.C))
        return n if abs(self.C - 1.0 / n ** 2) < 1e-12 else None

    def density(self, r, theta):
        """Volume density sqrt(g) in the polar chart."""
        return math.sqrt(self.C) * r * np.sqrt(1.0 + self.h(r, theta))


# ---------------------------------------------------------------------------
# ends

@dataclass(frozen=True)
class EndPerturbation:
    """Coefficients a1, a2, a3 of y^-2 (dx^2 + dy^2 + a1 dx^2 + a2 dx dy + a3 dy^2)."""

    x: np.ndarray
    y: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    eps0: float = 0.5

    def __post_init__(self):
        shape = (len(self.x), len(self.y))
        for name in ("a1", "a2", "a3"):
            if getattr(self, name).shape != shape:
                raise SpecError(f"end perturbation {name} must have shape {shape}")
        if np.any(np.diff(self.y) <= 0) or np.any(np.diff(self.x) <= 0):
            raise SpecError("end perturbation grid must be increasing")

    def coefficients(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = []
        for a in (self.a1, self.a2, self.a3):
            it = RegularGridInterpolator((self.x, self.y), a, bounds_error=False, fill_value=0.0)
            xb, yb = np.broadcast_arrays(x, y)
            out.append(it(np.stack([xb.ravel(), yb.ravel()], -1)).reshape(xb.shape))
        return out

    def decay_check(self, C: Optional[float] = None) -> float:
        """Largest ratio |a_i| (1+|log y|)^(1+eps0) and |y d_y a_i| (1+|log y|)^(2+eps0).

        Returns the ratio; it is bounded by C on an admissible tabulation.
        """
        ly = np.abs(np.log(self.y))
        w0 = (1 + ly) ** (1 + self.eps0)
        w1 = (1 + ly) ** (2 + self.eps0)
        worst = 0.0
        logy = np.log(self.y)
        for a in (self.a1, self.a2, self.a3):
            worst = max(worst, float(np.max(np.abs(a) * w0[None, :])))
            if len(self.y) > 2:
                da = np.gradient(a, logy, axis=1)
                worst = max(worst, float(np.max(np.abs(da) * w1[None, :])))
        if C is not None and worst > C:
            raise SpecError(f"end perturbation violates the decay bound ({worst:.3g} > {C})")
        return worst


@dataclass(frozen=True)
class EndSpec:
    kind: str
    radius: float
    perturbation: Optional[EndPerturbation] = None

    def __post_init__(self):
        if self.kind not in ("cusp", "regular"):
            raise SpecError(f"end kind must be cusp or regular, got {self.kind!r}")
        if not self.radius > 0:
            raise SpecError("end radius must be positive")
        if self.kind == "cusp" and self.perturbation is not None:
            raise SpecError("cusp ends carry the exact hyperbolic metric")


# ---------------------------------------------------------------------------
# interiors

def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


@dataclass(frozen=True)
class WarpedProfile:
    """Rotationally symmetric core ds^2 = dt^2 + f(t)^2 dtheta^2, theta in [0, 2 pi).

    ``t`` is the log-height coordinate of the model cylinder: the free metric
    has f(t) = r e^{-t}.  Either tabulated (t, f) samples or the closed form
    f = r e^{-t} (1 + amplitude * bump((t - center)/width)) with the smooth
    compactly supported bump exp(1 - 1/(1 - s^2)).
    """

    t: np.ndarray
    f: np.ndarray
    form: str = "table"
    radius: float = 1.0
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    angular_amplitude: float = 0.0
    angular_mode: int = 0

    def __post_init__(self):
        if self.form not in ("table", "bump"):
            raise SpecError(f"unknown warped form {self.form!r}")
        if np.any(np.diff(self.t) <= 0):
            raise SpecError("warped profile grid must be increasing")
        if np.any(self.f <= 0):
            raise SpecError("warped profile must be positive")
        if self.form == "bump" and self.amplitude <= -1:
            raise SpecError("bump amplitude must exceed -1")

    @classmethod
    def bump(cls, radius=1.0, amplitude=0.0, center=0.0, width=1.0, n=401,
             angular_amplitude=0.0, angular_mode=0):
        t = np.linspace(center - width, center + width, n)
        f = radius * np.exp(-t) * (1 + amplitude * _bump((t - center) / width))
        return cls(t=t, f=f, form="bump", radius=radius, amplitude=amplitude,
                   center=center, width=width, angular_amplitude=angular_amplitude,
                   angular_mode=angular_mode)

    @property
    def symmetric(self) -> bool:
        return self.angular_amplitude == 0.0

    @property
    def is_free(self) -> bool:
        """True when the profile is exactly r e^{-t} with no angular term."""
        if not self.symmetric:
            return False
        if self.form == "bump":
            return self.amplitude == 0.0
        return bool(np.allclose(self.f * np.exp(self.t), self.f[0] * np.exp(self.t[0]),
                                rtol=1e-14, atol=0.0))

    def end_radii(self) -> tuple[float, float]:
        """Radii r with f = r e^{-t} at the bottom and top of the support."""
        lo, hi = self.support
        lf = self.log_f(np.array([lo, hi]))[0]
        return float(math.exp(lf[0] + lo)), float(math.exp(lf[1] + hi))

    def conformal(self, t, theta):
        """Log conformal factor phi of the angular perturbation e^{2 phi} g."""
        t = np.asarray(t, dtype=float)
        if self.angular_amplitude == 0.0:
            return np.zeros(np.broadcast(t, np.asarray(theta)).shape)
        s = (t - self.center) / self.width
        return self.angular_amplitude * _bump(s) * np.cos(self.angular_mode * np.asarray(theta))

    @functools.cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.t, np.log(self.f))

    @property
    def support(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def log_f(self, t):
        """log f and its first two t-derivatives."""
        t = np.asarray(t, dtype=float)
        if self.form == "bump":
            s = (t - self.center) / self.width
            b = _bump(s)
            m = np.abs(s) < 1
            q = np.zeros_like(s)
            q[m] = 1.0 - s[m] ** 2
            db = np.zeros_like(s)
            d2b = np.zeros_like(s)
            # b' = b * (-2 s / q^2), b'' = b * ((2 s/q^2)^2 - (2 + 6 s^2)/q^3)
            db[m] = b[m] * (-2 * s[m] / q[m] ** 2)
            d2b[m] = b[m] * ((2 * s[m] / q[m] ** 2) ** 2 - (2 + 6 * s[m] ** 2) / q[m] ** 3)
            db /= self.width
            d2b /= self.width ** 2
            g = 1 + self.amplitude * b
            lf = math.log(self.radius) - t + np.log(g)
            dlf = -1 + self.amplitude * db / g
            d2lf = self.amplitude * d2b / g - (self.amplitude * db / g) ** 2
            return lf, dlf, d2lf
        spline = self._spline
        tt = np.clip(t, self.t[0], self.t[-1])
        lf = spline(tt)
        dlf = spline(tt, 1)
        d2lf = spline(tt, 2)
        # beyond the table the ends take over with slopes fixed by the junctions
        lo, hi = t < self.t[0], t > self.t[-1]
        lf = np.where(lo, spline(self.t[0]) + spline(self.t[0], 1) * (t - self.t[0]), lf)
        lf = np.where(hi, spline(self.t[-1]) + spline(self.t[-1], 1) * (t - self.t[-1]), lf)
        dlf = np.where(lo, spline(self.t[0], 1), dlf)
        dlf = np.where(hi, spline(self.t[-1], 1), dlf)
        d2lf = np.where(lo | hi, 0.0, d2lf)
        return lf, dlf, d2lf

    def radius_at(self, t) -> np.ndarray:
        return np.exp(self.log_f(t)[0])


@dataclass(frozen=True)
class SurfaceSpec:
    name: str
    ends: tuple[EndSpec, ...]
    interior: object
    singular_points: tuple[ConicalPoint, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        kinds = [e.kind for e in self.ends]
        if "cusp" in kinds:
            first_reg = kinds.index("regular") if "regular" in kinds else len(kinds)
            if "cusp" in kinds[first_reg:]:
                raise SpecError("cusp ends must be listed before regular ends")

    @property
    def n_cusps(self) -> int:
        return sum(e.kind == "cusp" for e in self.ends)

    def cone(self, label: str) -> ConicalPoint:
        for p in self.singular_points:
            if p.label == label:
                return p
        raise KeyError(label)


# ---------------------------------------------------------------------------
# elliptic-point charts

def cone_chart_r_from_rho(rho, n: int):
    """Geodesic radius r of the point with |zeta| = rho in the order-n chart."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho >= 1):
        raise ValueError("rho must lie in [0, 1)")
    if n < 1:
        raise ValueError("order must be >= 1")
    t = rho ** (1.0 / n)
    return 2.0 * np.arctanh(t)


def cone_chart_rho_from_r(r, n: int):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    return np.tanh(r / 2.0) ** n


def zeta_pullback_factor(zeta, n: int):
    """Conformal factor of the hyperbolic metric in the uniformizing zeta disc."""
    a = np.abs(zeta)
    lam = 2.0 - 2.0 / n
    return (4.0 / n ** 2) * a ** (-lam) * (1 - a ** (2.0 / n)) ** (-2)


def cone_metric_pullback(r, theta, n: int) -> np.ndarray:
    """Metric tensor in (r, theta) of the order-n elliptic chart: diag(1, sinh^2 r / n^2)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    g = np.zeros(r.shape + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = np.sinh(r) ** 2 / n ** 2
    return g


def funnel_metric(y) -> np.ndarray:
    """Metric of the hyperbolic funnel in (t, y) with y = 2 e^{-r}."""
    y = np.asarray(y, dtype=float)
    g = np.zeros(y.shape + (2, 2))
    g[..., 0, 0] = (1.0 / y + y / 4.0) ** 2
    g[..., 1, 1] = 1.0 / y ** 2
    return g


# ---------------------------------------------------------------------------
# metric queries

@dataclass(frozen=True)
class ChartPoint:
    """Coordinates in a named chart: ``end.<i>`` (x, y), ``cone.<label>`` (r, theta),
    ``interior`` (t, theta) for warped cores or mesh chart coordinates."""

    chart: str
    coords: tuple[float, float]


def metric_at(surface: SurfaceSpec, point: ChartPoint) -> tuple[np.ndarray, float]:
    """Metric tensor and volume density sqrt(det g) at a chart point."""
    u, v = point.coords
    chart = point.chart
    if chart.startswith("end."):
        idx = int(chart.split(".", 1)[1]) - 1
        if not 0 <= idx < len(surface.ends):
            raise ValueError(f"no end {chart}")
        end = surface.ends[idx]
        y = v
        if end.kind == "cusp":
            if y <= 1:
                raise ValueError("cusp chart covers y > 1 only")
            g = np.eye(2) / y ** 2
        else:
            if not 0 < y < 1:
                raise ValueError("regular end chart covers 0 < y < 1 only")
            a1 = a2 = a3 = 0.0
            if end.perturbation is not None:
                a1, a2, a3 = (float(c) for c in end.perturbation.coefficients(u, y))
            g = np.array([[1 + a1, a2 / 2], [a2 / 2, 1 + a3]]) / y ** 2
    elif chart.startswith("cone."):
        p = surface.cone(chart.split(".", 1)[1])
        r, th = u, v
        if not 0 < r < p.epsilon:
            raise ValueError(f"r outside the chart radius of cone {p.label}")
        g = np.diag([1.0, p.C * r ** 2 * (1 + float(p.h(r, th)))])
    elif chart == "interior":
        interior = surface.interior
        if isinstance(interior, WarpedProfile):
            f = float(interior.radius_at(u))
            g = np.diag([1.0, f ** 2])
        elif hasattr(interior, "metric_at_point"):
            g = interior.metric_at_point(np.array([u, v]))
        else:
            raise ValueError("interior has no chart metric")
    else:
        raise ValueError(f"unknown chart {chart!r}")
    if np.any(np.linalg.eigvalsh(g) <= 0):
        raise ValueError("metric is not positive definite here")
    return g, float(math.sqrt(np.linalg.det(g)))


# ---------------------------------------------------------------------------
# geodesic balls

def _gl_panels(r: float, per_panel: int = 32) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre, one panel per decade down to 1e-6 r plus [0, 1e-6 r]
    edges = [0.0] + [r * 10.0 ** (-k) for k in range(6, -1, -1)]
    x0, w0 = np.polynomial.legendre.leggauss(per_panel)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * x0 + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w0)
    return np.concatenate(xs), np.concatenate(ws)


def polar_ball_area(density: Callable, r: float, n_theta: int = 256) -> float:
    """Integrate a geodesic-polar density J(s, theta) over s < r."""
    s, ws = _gl_panels(r)
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    vals = density(s[:, None], th[None, :])
    return float(ws @ vals.mean(axis=1) * 2 * np.pi)


def _christoffel(metric, x, h=1e-5):
    """Christoffel symbols Gamma^k_ij of a vectorized 2-D metric at points x (..., 2)."""
    g = metric(x)
    ginv = np.linalg.inv(g)
    dg = np.empty(x.shape[:-1] + (2, 2, 2))  # dg[..., l, i, j] = d_l g_ij
    for l in range(2):
        e = np.zeros(2)
        e[l] = h
        dg[..., l, :, :] = (metric(x + e) - metric(x - e)) / (2 * h)
    # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    t = (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, t)


def _gauss_curvature(metric, x, h=1e-4):
    """Gaussian curvature from the Brioschi formula with finite differences."""
    def comp(p):
        g = metric(p)
        return g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]

    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    E, F, G = comp(x)
    Ep, Fp, Gp = comp(x + e1)
    Em, Fm, Gm = comp(x - e1)
    Eq, Fq, Gq = comp(x + e2)
    En, Fn, Gn = comp(x - e2)
    Epq, Fpq, Gpq = comp(x + e1 + e2)
    Epn, Fpn, Gpn = comp(x + e1 - e2)
    Emq, Fmq, Gmq = comp(x - e1 + e2)
    Emn, Fmn, Gmn = comp(x - e1 - e2)
    Eu, Ev = (Ep - Em) / (2 * h), (Eq - En) / (2 * h)
    Fu, Fv = (Fp - Fm) / (2 * h), (Fq - Fn) / (2 * h)
    Gu, Gv = (Gp - Gm) / (2 * h), (Gq - Gn) / (2 * h)
    Evv = (Eq - 2 * E + En) / h ** 2
    Guu = (Gp - 2 * G + Gm) / h ** 2
    Fuv = (Fpq - Fpn - Fmq + Fmn) / (4 * h ** 2)
    m1 = np.stack([
        np.stack([-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2], -1),
        np.stack([Fv - Gu / 2, E, F], -1),
        np.stack([Gv / 2, F, G], -1)], -2)
    z = np.zeros_like(E)
    m2 = np.stack([
        np.stack([z, Ev / 2, Gu / 2], -1),
        np.stack([Ev / 2, E, F], -1),
        np.stack([Gu / 2, F, G], -1)], -2)
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (E * G - F ** 2) ** 2


def _shoot_density(metric, center, r, n_theta=256, n_steps=400):
    """Geodesic polar density J(s, theta) by shooting geodesics with Jacobi fields."""
    x0 = np.asarray(center, dtype=float)
    g0 = metric(x0[None, :])[0]
    # g-orthonormal initial directions
    w, v = np.linalg.eigh(g0)
    half = v @ np.diag(1 / np.sqrt(w)) @ v.T
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    dirs = (half @ np.stack([np.cos(th), np.sin(th)])).T
    x = np.repeat(x0[None, :], n_theta, 0)
    p = dirs.copy()
    J = np.zeros(n_theta)
    dJ = np.ones(n_theta)
    ds = r / n_steps
    s_grid = np.linspace(0, r, n_steps + 1)
    Js = np.zeros((n_steps + 1, n_theta))

    def rhs(state):
        xx, pp, jj, djj = state
        gam = _christoffel(metric, xx)
        acc = -np.einsum("...kij,...i,...j->...k", gam, pp, pp)
        K = _gauss_curvature(metric, xx)
        return pp, acc, djj, -K * jj

    for i in range(n_steps):
        st = (x, p, J, dJ)
        k1 = rhs(st)
        k2 = rhs(tuple(a + 0.5 * ds * b for a, b in zip(st, k1)))
        k3 = rhs(tuple(a + 0.5 * ds * b for a, b in zip(st, k2)))
        k4 = rhs(tuple(a + ds * b for a, b in zip(st, k3)))
        x, p, J, dJ = (a + ds / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                       for a, b1, b2, b3, b4 in zip(st, k1, k2, k3, k4))
        Js[i + 1] = J
    return s_grid, th, Js


def ball_area(surface: Union[SurfaceSpec, Callable, None], center, r: float,
              n_theta: int = 256) -> float:
    """Area of the geodesic ball B(center, r).

    ``center`` may be a :class:`ConicalPoint`, the label of one of the
    surface's cone points, or chart coordinates with ``surface`` a vectorized
    metric callable ``g(x) -> (..., 2, 2)``; in the last case the polar
    density comes from geodesics and Jacobi fields shot from the center.
    ``surface=None`` with coordinates means the Euclidean plane.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if isinstance(center, str):
        if not isinstance(surface, SurfaceSpec):
            raise ValueError("cone labels need a SurfaceSpec")
        center = surface.cone(center)
    if isinstance(center, ConicalPoint):
        if r > center.epsilon:
            raise ValueError("ball escapes the cone chart")
        return polar_ball_area(center.density, r, n_theta)
    if surface is None:
        return polar_ball_area(lambda s, th: s + 0 * th, r, n_theta)
    if isinstance(surface, SurfaceSpec):
        raise ValueError("chart-coordinate centers need a metric callable")
    s, th, Js = _shoot_density(surface, center, r, n_theta)
    if np.any(Js[1:] <= 0):
        raise ValueError("radius exceeds the conjugate radius at this center")
    # Simpson in s on the uniform shooting grid
    w = np.ones(len(s))
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    w *= (s[1] - s[0]) / 3
    if (len(s) - 1) % 2:
        raise ValueError("shooting grid must have an even number of steps")
    return float(w @ Js.mean(axis=1) * 2 * np.pi)


def cone_constant_estimate(areas: Sequence[tuple[float, float]], snap: float = 0.05,
                           degree: int = 2) -> tuple[float, float, Optional[int]]:
    """Extrapolate area/(pi r^2) to r -> 0.

    Returns (L, C_hat, n_hat) with C_hat = L^2 and n_hat = round(1/L) when
    1/L is within ``snap`` of an integer, else None.  ``degree`` caps the
    polynomial in r used for the extrapolation.
    """
    pts = sorted((float(r), float(a)) for r, a in areas)
    if len(pts) < 3:
        raise ValueError("at least three radii are needed")
    rs = np.array([p[0] for p in pts])
    As = np.array([p[1] for p in pts])
    if np.any(rs <= 0) or np.any(np.diff(rs) <= 0):
        raise ValueError("radii must be positive and distinct")
    if np.any(np.diff(As) <= 0):
        raise ValueError("areas must increase with the radius")
    q = As / (np.pi * rs ** 2)
    deg = max(0, min(degree, len(rs) - 2))
    V = np.vander(rs, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, q, rcond=None)
    L = float(coef[0])
    if not L > 0:
        raise ValueError("extrapolated limit is not positive")
    inv = 1.0 / L
    n_hat = int(round(inv)) if abs(inv - round(inv)) < snap and round(inv) >= 1 else None
    return L, L * L, n_hat
