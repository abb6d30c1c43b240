"""Helmholtz problems on truncated surfaces with one cusp end and one regular end.

The core is a warped cylinder ds^2 = dt^2 + f(t)^2 dtheta^2 in t = log y,
joined to the exact cusp (f = r e^{-t}, t above the core) and to the exact
regular end (f = r e^{-t}, t below the core).  Two backends:

``mode``
    per angular mode, the radial equation is integrated across the core only
    (DOP853); outside the core the free solutions are used in closed form, so
    the transparent conditions are exact and the truncation heights drop out.
``fem``
    P1 elements on a structured (t, theta) cylinder mesh truncated at y_min
    and Y, with per-mode Dirichlet-to-Neumann rows at both rings.  Handles
    angular (non-symmetric) conformal perturbations.

Sign and normalization conventions follow the expansion

    u ~ w_c^- y^{1/2-ik} psi_c^- + w^- y^{1/2+ik} psi_r^-
        - w_c^+ y^{1/2+ik} psi_c^+ - w^+ y^{1/2-ik} psi_r^+,

with psi^+ = S psi^-.  The cusp entry of psi is the constant the mode-0
profile multiplies; regular entries are coefficients against orthonormal
circle modes.  Hence the weight W = diag(2 pi r_c, 1, ..., 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from .charts import SpecError, SurfaceSpec, WarpedProfile
from .freemodel import freq_constants, nu_from_z
from .specfun import bessel_I, bessel_I_deriv, bessel_K, bessel_K_deriv, gamma_complex

__all__ = [
    "NearResonanceError",
    "OverflowGuardError",
    "TruncatedProblem",
    "Branch",
    "free_branch",
    "transparent_bc",
    "HelmholtzField",
    "solve_helmholtz",
    "ScatterMatrix",
    "physical_smatrix",
    "GenScatterData",
    "generalized_smatrix_apply",
    "max_safe_mode",
    "mode_ndmap",
    "gen_smatrix_vs_ndmap",
]

LOG_OVERFLOW = 700.0
_RTOL = 1e-12
_ATOL = 1e-14


class NearResonanceError(RuntimeError):
    """k^2 too close to an eigenvalue or resonance of the truncated problem."""


class OverflowGuardError(RuntimeError):
    def __init__(self, message: str, max_safe_n: int):
        super().__init__(message)
        self.max_safe_n = max_safe_n


# ---------------------------------------------------------------------------
# problem description

@dataclass(frozen=True)
class TruncatedProblem:
    surface: SurfaceSpec
    k: float
    Y: float = 4.0
    y_min: float = 0.25
    backend: str = "mode"
    n_max: int = 16
    fem_nt: int = 320
    fem_ntheta: int = 48

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.backend not in ("mode", "fem"):
            raise ValueError("backend must be 'mode' or 'fem'")
        if not self.Y > 2:
            raise ValueError("cusp truncation needs Y > 2")
        if not 0 < self.y_min < 1:
            raise ValueError("regular truncation needs 0 < y_min < 1")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        kinds = [e.kind for e in self.surface.ends]
        if kinds != ["cusp", "regular"]:
            raise SpecError("the forward solvers handle one cusp end followed by one regular end")
        prof = self.profile
        if prof is not None:
            lo, hi = prof.support
            if math.log(self.Y) < hi - 1e-12 or math.log(self.y_min) > lo + 1e-12:
                raise ValueError("truncations must lie outside the perturbed core")
            r_bot, r_top = prof.end_radii()
            for r, end in ((r_top, self.surface.ends[0]), (r_bot, self.surface.ends[1])):
                if abs(r - end.radius) > 1e-8 * end.radius:
                    raise SpecError(f"core radius {r:.12g} does not match end radius {end.radius}")
            if self.backend == "mode" and not prof.symmetric:
                raise ValueError("mode backend needs a rotationally symmetric core")

    @property
    def profile(self) -> Optional[WarpedProfile]:
        interior = self.surface.interior
        if interior is None:
            return None
        if not isinstance(interior, WarpedProfile):
            raise SpecError("forward solvers need a warped interior")
        return interior

    @property
    def r_cusp(self) -> float:
        return self.surface.ends[0].radius

    @property
    def r_reg(self) -> float:
        return self.surface.ends[1].radius

    @property
    def is_free(self) -> bool:
        p = self.profile
        return p is None or (p.is_free and abs(self.r_cusp - self.r_reg) < 1e-15 * self.r_cusp)

    @property
    def core(self) -> tuple[float, float]:
        """t-interval carrying the perturbation (empty for the free cylinder)."""
        p = self.profile
        if p is None or self.is_free:
            return 0.0, 0.0
        return p.support

    def with_k(self, k: float) -> "TruncatedProblem":
        return TruncatedProblem(self.surface, k, self.Y, self.y_min, self.backend,
                                self.n_max, self.fem_nt, self.fem_ntheta)


# ---------------------------------------------------------------------------
# free branches

@dataclass(frozen=True)
class Branch:
    """u = mantissa e^{log_scale}, u_t = dmantissa e^{log_scale} (t = log y)."""

    mantissa: complex
    dmantissa: complex
    log_scale: float

    @property
    def logderiv(self) -> complex:
        return self.dmantissa / self.mantissa


def _bessel_branch(kind: str, nu: complex, zeta: float, y: float) -> Branch:
    x = zeta * y
    if kind == "I":
        F, dF = bessel_I(nu, x), bessel_I_deriv(nu, x)
    else:
        F, dF = bessel_K(nu, x), bessel_K_deriv(nu, x)
    m = complex(F.mantissa)
    dm = complex(dF.mantissa) * math.exp(float(dF.log_scale) - float(F.log_scale))
    s = math.sqrt(y)
    return Branch(s * m, s * (0.5 * m + x * dm), float(F.log_scale))


def _power_branch(p: complex, y: float) -> Branch:
    ly = math.log(y)
    m = complex(math.cos(p.imag * ly), math.sin(p.imag * ly))
    return Branch(m, p * m, p.real * ly)


def free_branch(end: str, role: str, n: int, r: float, k: float, y: float) -> Branch:
    """Free mode solution on an exact end.

    ``end`` is "cusp" or "regular", ``role`` is "in" or "out" (for k^2 + i0).
    Cusp: out = y^{1/2+ik} or y^{1/2}K_{ik}; in = y^{1/2-ik} or y^{1/2}I_{-ik}.
    Regular: out = y^{1/2-ik} or y^{1/2}I_{-ik}; in = y^{1/2+ik} or y^{1/2}I_{ik}.
    """
    if role not in ("in", "out") or end not in ("cusp", "regular"):
        raise ValueError("bad branch request")
    sign = 1 if (end == "cusp") == (role == "out") else -1
    if n == 0:
        return _power_branch(0.5 + sign * 1j * k, y)
    zeta = abs(n) / r
    if end == "cusp" and role == "out":
        return _bessel_branch("K", 1j * k, zeta, y)
    return _bessel_branch("I", sign * 1j * k, zeta, y)


def _lead(end: str, role: str, n: int, r: float, k: float) -> complex:
    """Coefficient of y^{1/2 +- ik} in the small-y expansion of a regular-end branch."""
    if n == 0 or end == "cusp":
        return 1.0
    sign = 1 if role == "in" else -1
    zeta = abs(n) / r
    return (zeta / 2) ** (sign * 1j * k) / complex(gamma_complex(1 + sign * 1j * k))


def transparent_bc(k: float, end, n: int, location: float) -> complex:
    """Robin coefficient c with d_y w = c w for the outgoing free solution at y = location."""
    kind = end.kind if hasattr(end, "kind") else str(end)
    r = end.radius if hasattr(end, "radius") else 1.0
    b = free_branch(kind, "out", n, r, k, location)
    if abs(b.mantissa) < 1e-13:
        raise ZeroDivisionError("outgoing solution vanishes at the truncation; shift it by one cell")
    return b.logderiv / location


# ---------------------------------------------------------------------------
# ModeODE

def _mode_rhs(profile: WarpedProfile, n: int, z: complex):
    def rhs(t, s):
        lf, dlf, _ = profile.log_f(np.array([t]))
        q = n * n * math.exp(-2 * lf[0]) - 0.25 - z
        return np.array([s[1], -dlf[0] * s[1] + q * s[0]])
    return rhs


def _propagate(profile: WarpedProfile, n: int, z: complex, t0: float, t1: float,
               state: np.ndarray, dense: bool = False):
    """Carry (u, u_t) from t0 to t1 across the core."""
    if t0 == t1:
        return np.asarray(state, dtype=complex), None
    sol = solve_ivp(_mode_rhs(profile, n, z), (t0, t1), np.asarray(state, dtype=complex),
                    method="DOP853", rtol=_RTOL, atol=_ATOL, dense_output=dense)
    if not sol.success:
        raise RuntimeError(f"mode {n}: radial integration failed ({sol.message})")
    return sol.y[:, -1], sol.sol


def _decompose(u: complex, du: complex, b1: Branch, b2: Branch) -> tuple[complex, complex]:
    """Coefficients (c1, c2), scaled by e^{-log_scale}, of (u, u_t) on two branches."""
    M = np.array([[b1.mantissa, b2.mantissa], [b1.dmantissa, b2.dmantissa]])
    c = np.linalg.solve(M, np.array([u, du]))
    return complex(c[0]), complex(c[1])


def _core_states(prob: TruncatedProblem, n: int):
    """K-type (or zero-mode) top data propagated to the bottom of the core."""
    k = prob.k
    ta, tb = prob.core
    yb = math.exp(tb)
    prof = prob.profile
    if n == 0:
        cols = []
        for role in ("out", "in"):
            br = free_branch("cusp", role, 0, prob.r_cusp, k, yb)
            st = np.array([br.mantissa, br.dmantissa])
            if prof is not None and not prob.is_free:
                st, _ = _propagate(prof, 0, k * k, tb, ta, st)
            cols.append((st, br.log_scale))
        return cols
    br = free_branch("cusp", "out", n, prob.r_cusp, k, yb)
    st = np.array([br.mantissa, br.dmantissa])
    if prof is not None and not prob.is_free:
        st, _ = _propagate(prof, n, k * k, tb, ta, st)
    return [(st, br.log_scale)]


def _mode_block(prob: TruncatedProblem, n: int) -> np.ndarray:
    """Scattering block of mode n in (cusp, reg) physical coordinates.

    n = 0 returns the 2x2 (cusp, reg0) block; n != 0 returns the 1x1 reg block.
    """
    k = prob.k
    fc = freq_constants(k)
    ta, _ = prob.core
    ya = math.exp(ta)
    rr, rc = prob.r_reg, prob.r_cusp
    if n == 0:
        b_in = free_branch("regular", "in", 0, rr, k, ya)
        b_out = free_branch("regular", "out", 0, rr, k, ya)
        T = np.zeros((2, 2), dtype=complex)
        for j, (st, s) in enumerate(_core_states(prob, 0)):
            g, d = _decompose(st[0], st[1], b_in, b_out)
            T[0, j] = g * math.exp(s - b_in.log_scale)
            T[1, j] = d * math.exp(s - b_out.log_scale)
        if abs(T[0, 0]) < 1e-8 * np.abs(T).max():
            raise NearResonanceError(f"zero mode transfer is singular at k = {k}")
        sc = math.sqrt(2 * math.pi * rc)
        S = np.zeros((2, 2), dtype=complex)
        for col, (ac, a0) in enumerate(((1.0, 0.0), (0.0, 1.0))):
            beta = fc.omega_c_minus * sc * ac
            alpha = (fc.omega_minus * a0 - T[0, 1] * beta) / T[0, 0]
            delta = T[1, 0] * alpha + T[1, 1] * beta
            S[0, col] = -alpha / (fc.omega_c_plus * sc)
            S[1, col] = -delta / fc.omega_plus
        return S
    (st, s), = _core_states(prob, n)
    b_in = free_branch("regular", "in", n, rr, k, ya)
    b_out = free_branch("regular", "out", n, rr, k, ya)
    c1, c2 = _decompose(st[0], st[1], b_in, b_out)
    if abs(c1) * math.exp(b_in.log_scale) < 1e-8 * abs(c2) * math.exp(b_out.log_scale):
        raise NearResonanceError(f"mode {n} is trapped at k = {k}")
    ratio = c2 / c1 * math.exp(b_out.log_scale - b_in.log_scale)
    lin, lout = _lead("regular", "in", n, rr, k), _lead("regular", "out", n, rr, k)
    # incoming w^- a lin^{-1} I_{ik}, outgoing -w^+ b lout^{-1} I_{-ik}
    Snn = -ratio * fc.omega_minus / lin * lout / fc.omega_plus
    return np.array([[Snn]])


# ---------------------------------------------------------------------------
# FEM2D

@dataclass(frozen=True)
class _CylMesh:
    t: np.ndarray
    ntheta: int
    tris: np.ndarray

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.ntheta

    @property
    def n_nodes(self) -> int:
        return len(self.t) * self.ntheta

    def ring(self, i: int) -> np.ndarray:
        return i * self.ntheta + np.arange(self.ntheta)


def _graded_t(t_lo: float, t_hi: float, nt: int, rate: float) -> np.ndarray:
    """Rings equidistributing sqrt(1 + (rate e^t)^2), the local decay rate of mode solutions."""
    s = np.linspace(t_lo, t_hi, 4001)
    dens = np.sqrt(1 + (rate * np.exp(s)) ** 2)
    cum = np.concatenate([[0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s))])
    return np.interp(np.linspace(0, cum[-1], nt + 1), cum, s)


def _cyl_mesh(t_lo: float, t_hi: float, nt: int, ntheta: int, rate: float = 0.0) -> _CylMesh:
    t = _graded_t(t_lo, t_hi, nt, rate)
    i, j = np.meshgrid(np.arange(nt), np.arange(ntheta), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * ntheta + j
    b = i * ntheta + (j + 1) % ntheta
    c = (i + 1) * ntheta + j
    d = (i + 1) * ntheta + (j + 1) % ntheta
    tris = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])
    return _CylMesh(t, ntheta, tris)


def _fem_matrices(prob: TruncatedProblem, mesh: _CylMesh):
    """Stiffness and (weighted) mass for dt^2 + f^2 dtheta^2 times e^{2 phi}."""
    nth = mesh.ntheta
    tt = mesh.t[mesh.tris // nth]
    jj = mesh.tris % nth
    th = jj * mesh.dtheta
    # unwrap the periodic seam
    th = np.where(th - th[:, :1] < -math.pi, th + 2 * math.pi, th)
    th = np.where(th - th[:, :1] > math.pi, th - 2 * math.pi, th)
    e1t, e1h = tt[:, 1] - tt[:, 0], th[:, 1] - th[:, 0]
    e2t, e2h = tt[:, 2] - tt[:, 0], th[:, 2] - th[:, 0]
    det = e1t * e2h - e1h * e2t
    area = 0.5 * np.abs(det)
    # gradients of barycentric functions
    gt = np.stack([e1h - e2h, e2h, -e1h], 1) / det[:, None]
    gh = np.stack([e2t - e1t, -e2t, e1t], 1) / det[:, None]
    tc = tt.mean(1)
    hc = th.mean(1)
    prof = prob.profile
    if prof is None:
        f = prob.r_cusp * np.exp(-tc)
        w = np.ones_like(tc)
    else:
        f = np.exp(prof.log_f(tc)[0])
        w = np.exp(2 * prof.conformal(tc, hc))
    Ke = area[:, None, None] * (f[:, None, None] * gt[:, :, None] * gt[:, None, :]
                                + (1 / f)[:, None, None] * gh[:, :, None] * gh[:, None, :])
    Me = (area * f * w)[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    N = mesh.n_nodes
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(N, N))
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(N, N))
    return K, M


def _dft_modes(ntheta: int) -> np.ndarray:
    return np.fft.fftfreq(ntheta, 1.0 / ntheta).astype(int)


def _ring_dtn(modes: np.ndarray, coeffs: np.ndarray, ntheta: int) -> np.ndarray:
    """Matrix of v -> sum_n c_n vhat_n e^{i n theta_j} on the ring nodes."""
    F = np.exp(-2j * math.pi * np.outer(modes, np.arange(ntheta)) / ntheta) / ntheta
    return F.conj().T @ (coeffs[:, None] * F) * ntheta


class _FemSolver:
    """Factorized FEM2D operator for one k."""

    def __init__(self, prob: TruncatedProblem):
        self.prob = prob
        k = prob.k
        t_lo, t_hi = math.log(prob.y_min), math.log(prob.Y)
        rate = min(prob.n_max, prob.fem_ntheta // 2) / min(prob.r_cusp, prob.r_reg)
        self.mesh = mesh = _cyl_mesh(t_lo, t_hi, prob.fem_nt, prob.fem_ntheta, rate)
        K, M = _fem_matrices(prob, mesh)
        nth = mesh.ntheta
        self.modes = _dft_modes(nth)
        self.f_top = prob.r_cusp / prob.Y
        self.f_bot = prob.r_reg / prob.y_min
        c_top = np.array([free_branch("cusp", "out", int(n), prob.r_cusp, k, prob.Y).logderiv
                          for n in self.modes])
        c_bot = np.array([free_branch("regular", "out", int(n), prob.r_reg, k, prob.y_min).logderiv
                          for n in self.modes])
        self.c_top, self.c_bot = c_top, c_bot
        dth = mesh.dtheta
        top, bot = mesh.ring(len(mesh.t) - 1), mesh.ring(0)
        Dt = _ring_dtn(self.modes, c_top, nth) * dth * self.f_top
        Db = _ring_dtn(self.modes, c_bot, nth) * dth * self.f_bot
        B = sp.lil_matrix((mesh.n_nodes, mesh.n_nodes), dtype=complex)
        B[np.ix_(top, top)] = -Dt
        B[np.ix_(bot, bot)] = Db
        A = (K - (0.25 + k * k) * M).astype(complex) + B.tocsr()
        self.M = M
        self.top, self.bot = top, bot
        self.lu = splu(A.tocsc())
        pivots = np.abs(self.lu.U.diagonal())
        if pivots.min() < 1e-12 * pivots.max():
            raise NearResonanceError(f"FEM operator nearly singular at k = {k}")

    def solve(self, in_top: Mapping[int, complex], in_bot: Mapping[int, complex],
              source: Optional[np.ndarray] = None):
        """Incoming data as coefficients of the free incoming branches' values on the rings."""
        prob, mesh = self.prob, self.mesh
        nth = mesh.ntheta
        theta = np.arange(nth) * mesh.dtheta
        rhs = np.zeros(mesh.n_nodes, dtype=complex)
        if source is not None:
            rhs += self.M @ source
        for ring, data, end, r, y, fr, sgn, cvec in (
                (self.top, in_top, "cusp", prob.r_cusp, prob.Y, self.f_top, 1.0, self.c_top),
                (self.bot, in_bot, "regular", prob.r_reg, prob.y_min, self.f_bot, -1.0, self.c_bot)):
            h = np.zeros(nth, dtype=complex)
            for n, amp in data.items():
                br = free_branch(end, "in", n, r, prob.k, y)
                c = cvec[list(self.modes).index(n)]
                scale = math.exp(br.log_scale)
                h += amp * scale * (br.dmantissa - c * br.mantissa) * np.exp(1j * n * theta)
            rhs[ring] += sgn * fr * mesh.dtheta * h
        return self.lu.solve(rhs)

    def ring_modes(self, u: np.ndarray, which: str) -> dict[int, complex]:
        ring = self.top if which == "top" else self.bot
        uh = np.fft.fft(u[ring]) / self.mesh.ntheta
        return {int(n): complex(v) for n, v in zip(self.modes, uh)}


# ---------------------------------------------------------------------------
# fields

@dataclass(frozen=True)
class HelmholtzField:
    """Mode samples u_n(t) on a t-grid (coefficients against e^{in theta}/sqrt(2 pi r))."""

    t: np.ndarray
    modes: dict[int, np.ndarray]
    backend: str
    residual: float = 0.0

    @property
    def y(self) -> np.ndarray:
        return np.exp(self.t)


def _incoming_profile(prob: TruncatedProblem, psi_in: Mapping[tuple[int, int], complex]):
    """Physical incoming amplitudes -> branch coefficients per (end, mode)."""
    k = prob.k
    fc = freq_constants(k)
    top: dict[int, complex] = {}
    bot: dict[int, complex] = {}
    for (end, n), amp in psi_in.items():
        if end == 1:
            if n != 0:
                raise ValueError("the cusp carries a single (n = 0) scattering channel")
            top[0] = top.get(0, 0) + fc.omega_c_minus * math.sqrt(2 * math.pi * prob.r_cusp) * amp
        elif end == 2:
            bot[n] = bot.get(n, 0) + fc.omega_minus * amp / _lead("regular", "in", n, prob.r_reg, k)
        else:
            raise ValueError(f"no end {end}")
    return top, bot


def solve_helmholtz(prob: TruncatedProblem, incoming: Optional[Mapping[tuple[int, int], complex]] = None,
                    source: Optional[np.ndarray] = None, nt: int = 401) -> HelmholtzField:
    """Solve with physical incoming amplitudes {(end, n): psi^-}.

    ``source`` (FEM only) is a nodal forcing vector.  The mode backend returns
    the field sampled on ``nt`` points of [log y_min, log Y].
    """
    incoming = dict(incoming or {})
    if prob.backend == "fem":
        solver = _FemSolver(prob)
        top, bot = _incoming_profile(prob, incoming)
        u = solver.solve(top, bot, source)
        mesh = solver.mesh
        grid = u.reshape(len(mesh.t), mesh.ntheta)
        coef = np.fft.fft(grid, axis=1) / mesh.ntheta
        r = prob.r_cusp
        modes = {int(n): coef[:, j] * math.sqrt(2 * math.pi * r)
                 for j, n in enumerate(solver.modes) if abs(n) <= prob.n_max}
        return HelmholtzField(mesh.t, modes, "fem")
    if source is not None:
        raise ValueError("the mode backend takes incoming data only")
    top, bot = _incoming_profile(prob, incoming)
    t = np.linspace(math.log(prob.y_min), math.log(prob.Y), nt)
    out: dict[int, np.ndarray] = {}
    for n in sorted(set(top) | set(bot)):
        out[n] = _mode_field(prob, n, top.get(n, 0), bot.get(n, 0), t)
    for n in range(-prob.n_max, prob.n_max + 1):
        out.setdefault(n, np.zeros(nt, dtype=complex))
    return HelmholtzField(t, out, "mode")


def _mode_field(prob: TruncatedProblem, n: int, a_top: complex, a_bot: complex,
                t: np.ndarray) -> np.ndarray:
    """Samples of one mode given incoming branch coefficients at both ends."""
    k = prob.k
    ta, tb = prob.core
    ya, yb = math.exp(ta), math.exp(tb)
    rc, rr = prob.r_cusp, prob.r_reg
    prof = prob.profile
    perturbed = prof is not None and not prob.is_free
    z = k * k

    def through(st, dense=True):
        if not perturbed:
            return st, None
        return _propagate(prof, n, z, tb, ta, st, dense=dense)

    if n == 0:
        # unknown outgoing coefficients: alpha (top, y^{1/2+ik}), delta (bottom, y^{1/2-ik})
        cols = []
        for role in ("out", "in"):
            br = free_branch("cusp", role, 0, rc, k, yb)
            st, sol = through(np.array([br.mantissa, br.dmantissa]) * math.exp(br.log_scale))
            cols.append((st, sol))
        b_in = free_branch("regular", "in", 0, rr, k, ya)
        b_out = free_branch("regular", "out", 0, rr, k, ya)
        T = np.zeros((2, 2), dtype=complex)
        for j, (st, _) in enumerate(cols):
            g, d = _decompose(st[0], st[1], b_in, b_out)
            T[:, j] = (g * math.exp(-b_in.log_scale), d * math.exp(-b_out.log_scale))
        alpha = (a_bot - T[0, 1] * a_top) / T[0, 0]
        delta = T[1, 0] * alpha + T[1, 1] * a_top
        top_c = (alpha, a_top)
        bot_c = (a_bot, delta)
        vals = np.zeros(len(t), dtype=complex)
        for i, tv in enumerate(t):
            y = math.exp(tv)
            if tv >= tb:
                vals[i] = top_c[0] * y ** (0.5 + 1j * k) + top_c[1] * y ** (0.5 - 1j * k)
            elif tv <= ta:
                vals[i] = bot_c[0] * y ** (0.5 + 1j * k) + bot_c[1] * y ** (0.5 - 1j * k)
            else:
                vals[i] = top_c[0] * cols[0][1](tv)[0] + top_c[1] * cols[1][1](tv)[0]
        return vals
    if a_top != 0:
        raise ValueError("mode backend: cusp modes n != 0 carry no physical incoming data")
    br = free_branch("cusp", "out", n, rc, k, yb)
    st, sol = through(np.array([br.mantissa, br.dmantissa]))
    b_in = free_branch("regular", "in", n, rr, k, ya)
    b_out = free_branch("regular", "out", n, rr, k, ya)
    c1, c2 = _decompose(st[0], st[1], b_in, b_out)
    # scale so the I_{ik} part carries a_bot
    lam = a_bot / (c1 * math.exp(-b_in.log_scale))
    vals = np.zeros(len(t), dtype=complex)
    for i, tv in enumerate(t):
        y = math.exp(tv)
        if tv >= tb:
            b = free_branch("cusp", "out", n, rc, k, y)
            vals[i] = lam * b.mantissa * math.exp(b.log_scale - br.log_scale)
        elif tv <= ta:
            bi = free_branch("regular", "in", n, rr, k, y)
            bo = free_branch("regular", "out", n, rr, k, y)
            vals[i] = lam * (c1 * bi.mantissa * math.exp(bi.log_scale - b_in.log_scale)
                             + c2 * bo.mantissa * math.exp(bo.log_scale - b_out.log_scale))
        else:
            vals[i] = lam * sol(tv)[0]
    return vals


# ---------------------------------------------------------------------------
# physical S-matrix

@dataclass(frozen=True)
class ScatterMatrix:
    """S(k) on channels [(1, 0)] + [(2, n) for |n| <= n_max]."""

    k: float
    channels: tuple[tuple[int, int], ...]
    matrix: np.ndarray
    weights: np.ndarray
    backend: str
    radii: tuple[float, float] = (1.0, 1.0)

    def unitarity_defect(self) -> float:
        W = np.diag(self.weights)
        S = self.matrix
        return float(np.linalg.norm(S.conj().T @ W @ S - W, 2))

    def entry(self, out: tuple[int, int], inc: tuple[int, int]) -> complex:
        return complex(self.matrix[self.channels.index(out), self.channels.index(inc)])

    def block(self, j: int, l: int) -> np.ndarray:
        rows = [i for i, c in enumerate(self.channels) if c[0] == j]
        cols = [i for i, c in enumerate(self.channels) if c[0] == l]
        return self.matrix[np.ix_(rows, cols)]

    def records(self) -> list[tuple]:
        d = self.unitarity_defect()
        out = []
        for i, (j, m) in enumerate(self.channels):
            for q, (l, n) in enumerate(self.channels):
                v = self.matrix[i, q]
                out.append((self.k, j, l, m, n, float(v.real), float(v.imag), d))
        return out


def _channels(n_max: int) -> tuple[tuple[int, int], ...]:
    return ((1, 0),) + tuple((2, n) for n in range(-n_max, n_max + 1))


def physical_smatrix(prob: TruncatedProblem) -> ScatterMatrix:
    chans = _channels(prob.n_max)
    idx = {c: i for i, c in enumerate(chans)}
    S = np.zeros((len(chans), len(chans)), dtype=complex)
    if prob.backend == "mode":
        blk0 = _mode_block(prob, 0)
        for a, ca in enumerate(((1, 0), (2, 0))):
            for b, cb in enumerate(((1, 0), (2, 0))):
                S[idx[ca], idx[cb]] = blk0[a, b]
        for n in range(1, prob.n_max + 1):
            v = _mode_block(prob, n)[0, 0]
            S[idx[(2, n)], idx[(2, n)]] = v
            S[idx[(2, -n)], idx[(2, -n)]] = v
    else:
        S = _fem_smatrix(prob, chans)
    w = np.ones(len(chans))
    w[0] = 2 * math.pi * prob.r_cusp
    return ScatterMatrix(prob.k, chans, S, w, prob.backend, (prob.r_cusp, prob.r_reg))


def _fem_smatrix(prob: TruncatedProblem, chans) -> np.ndarray:
    solver = _FemSolver(prob)
    k = prob.k
    fc = freq_constants(k)
    sc = math.sqrt(2 * math.pi * prob.r_cusp)
    sr = math.sqrt(2 * math.pi * prob.r_reg)
    S = np.zeros((len(chans), len(chans)), dtype=complex)
    out_top = free_branch("cusp", "out", 0, prob.r_cusp, k, prob.Y)
    for q, ch in enumerate(chans):
        top, bot = _incoming_profile(prob, {ch: 1.0})
        # ring coefficients are against e^{in theta}: divide by sqrt(2 pi r)
        top = {n: v / sc for n, v in top.items()}
        bot = {n: v / sr for n, v in bot.items()}
        u = solver.solve(top, bot)
        ut = solver.ring_modes(u, "top")
        ub = solver.ring_modes(u, "bottom")
        # cusp: u - u_in = -w_c^+ y^{1/2+ik} psi_c (constant profile)
        uin0 = 0.0
        if 0 in top:
            b = free_branch("cusp", "in", 0, prob.r_cusp, k, prob.Y)
            uin0 = top[0] * b.mantissa * math.exp(b.log_scale)
        val = out_top.mantissa * math.exp(out_top.log_scale)
        S[0, q] = -(ut[0] - uin0) / val / fc.omega_c_plus
        for i, (j, n) in enumerate(chans):
            if j != 2:
                continue
            uin = 0.0
            if n in bot:
                b = free_branch("regular", "in", n, prob.r_reg, k, prob.y_min)
                uin = bot[n] * b.mantissa * math.exp(b.log_scale)
            bo = free_branch("regular", "out", n, prob.r_reg, k, prob.y_min)
            coef = (ub[n] - uin) / (bo.mantissa * math.exp(bo.log_scale)) * sr
            S[i, q] = -coef * _lead("regular", "out", n, prob.r_reg, k) / fc.omega_plus
    return S


# ---------------------------------------------------------------------------
# generalized S-matrix

@dataclass(frozen=True)
class GenScatterData:
    """b_n = b_mantissa[n] * exp(scale_exp[n]) for incoming a_n (bare coefficients)."""

    k: float
    a: dict[int, complex]
    b_mantissa: dict[int, complex]
    scale_exp: dict[int, float]
    r_cusp: float
    weights: dict[int, float] = field(default_factory=dict)

    def b(self, n: int) -> complex:
        return self.b_mantissa[n] * math.exp(self.scale_exp[n])

    def b_norm_ratio(self) -> float:
        """||b|| / ||a|| with overflow-safe accumulation."""
        na = math.sqrt(sum(abs(v) ** 2 for v in self.a.values()))
        if na == 0:
            return 0.0
        logs = [math.log(abs(m)) + s for n, m in self.b_mantissa.items()
                for s in (self.scale_exp[n],) if m != 0]
        if not logs:
            return 0.0
        top = max(logs)
        return math.exp(top + 0.5 * math.log(sum(math.exp(2 * (l - top)) for l in logs))) / na

    def records(self) -> list[tuple]:
        out = []
        for n in sorted(self.a):
            a, b = self.a[n], self.b_mantissa[n]
            out.append((self.k, n, a.real, a.imag, b.real, b.imag, self.scale_exp[n]))
        return out


def max_safe_mode(k: float, Y: float, r: float) -> int:
    """Largest |n| whose incoming y^{1/2}I_{-ik}(|n| y / r) is representable at y = Y."""
    return int(math.floor(LOG_OVERFLOW * r / Y))


def _gen_ratio(prob: TruncatedProblem, n: int) -> tuple[complex, float]:
    """b_n / a_n as (mantissa, log scale) from matching at the core top."""
    k = prob.k
    ta, tb = prob.core
    yb = math.exp(tb)
    rc, rr = prob.r_cusp, prob.r_reg
    if prob.is_free:
        return 0j, 0.0
    ya = math.exp(ta)
    start = free_branch("regular", "out", n, rr, k, ya)
    st, _ = _propagate(prob.profile, n, k * k, ta, tb, np.array([start.mantissa, start.dmantissa]))
    rho = st[1] / st[0]
    A = free_branch("cusp", "in", n, rc, k, yb)
    B = free_branch("cusp", "out", n, rc, k, yb)
    den = B.mantissa * (B.logderiv - rho)
    if abs(den) < 1e-14 * abs(B.mantissa) * (abs(rho) + 1):
        raise NearResonanceError(f"mode {n}: matching is singular at k = {k}")
    return A.mantissa * (A.logderiv - rho) / den, A.log_scale - B.log_scale


def generalized_smatrix_apply(prob: TruncatedProblem, a: Mapping[int, complex]) -> GenScatterData:
    """b = S_11(k) a for the cusp end (mode backend).

    Outside the core u = a_n y^{1/2}I_{-ik} - b_n y^{1/2}K_{ik} (n != 0),
    a_0 y^{1/2-ik} - b_0 y^{1/2+ik}; the regular-end condition is exact.
    """
    if prob.backend != "mode":
        raise ValueError("the generalized S-matrix is computed with the mode backend")
    safe = max_safe_mode(prob.k, prob.Y, prob.r_cusp)
    bad = [n for n in a if abs(n) > safe or abs(n) > prob.n_max]
    if bad:
        raise OverflowGuardError(
            f"modes {sorted(bad)} exceed the safe range |n| <= {min(safe, prob.n_max)} "
            f"at k = {prob.k}, Y = {prob.Y}", min(safe, prob.n_max))
    bm: dict[int, complex] = {}
    se: dict[int, float] = {}
    cache: dict[int, tuple[complex, float]] = {}
    for n, an in a.items():
        key = abs(n)
        if key not in cache:
            cache[key] = _gen_ratio(prob, key)
        m, s = cache[key]
        bm[n] = complex(an) * m
        se[n] = s
    rc = prob.r_cusp
    weights = {n: (math.sqrt(math.pi * rc / (2 * abs(n))) if n else 1.0) for n in a}
    return GenScatterData(prob.k, {n: complex(v) for n, v in a.items()}, bm, se, rc, weights)


# ---------------------------------------------------------------------------
# N-D map of the interior and its consistency with generalized data

def _cheb(N: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2
    c *= (-1) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(1))
    return D, x


def mode_ndmap(prob: TruncatedProblem, n: int, y0: float, z=None, N: int = 160) -> complex:
    """Lambda_n(z) of the part y < y0 (Neumann data y d_y u = 1 at y0).

    Chebyshev collocation on [log y_min, log y0] with the exact outgoing
    condition at y_min; z defaults to k^2 + i0.
    """
    k = prob.k
    nu = nu_from_z((k, 1) if z is None else z)
    t_lo, t_hi = math.log(prob.y_min), math.log(y0)
    # split at the core edges so each panel sees a smooth coefficient
    breaks = sorted({t_lo, t_hi, *[c for c in prob.core if t_lo < c < t_hi]})
    if prob.is_free:
        breaks = [t_lo, t_hi]
    zz = -nu * nu
    prof = prob.profile
    panels = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        D, x = _cheb(N)
        t = lo + (x + 1) * (hi - lo) / 2
        D = D * 2 / (hi - lo)
        if prof is None or prob.is_free:
            dlf = -np.ones_like(t)
            inv_f2 = np.exp(2 * t) / prob.r_cusp ** 2
        else:
            lf, dlf, _ = prof.log_f(t)
            inv_f2 = np.exp(-2 * lf)
        L = D @ D + dlf[:, None] * D + np.diag(-n * n * inv_f2 + 0.25 + zz)
        panels.append((t, D, L))
    sizes = [len(p[0]) for p in panels]
    off = np.concatenate([[0], np.cumsum(sizes)])
    tot = off[-1]
    A = np.zeros((tot, tot), dtype=complex)
    rhs = np.zeros(tot, dtype=complex)
    for p, (t, D, L) in enumerate(panels):
        A[off[p]:off[p + 1], off[p]:off[p + 1]] = L
    # top of the last panel (x = 1 is index 0): Neumann
    t, D, _ = panels[-1]
    r0 = off[-2]
    A[r0] = 0
    A[r0, off[-2]:off[-1]] = D[0]
    rhs[r0] = 1.0
    # bottom of the first panel (index N): outgoing Robin
    t, D, _ = panels[0]
    rb = off[1] - 1
    if n == 0:
        c = 0.5 + nu
    else:
        x = abs(n) / prob.r_reg * prob.y_min
        I, dI = bessel_I(nu, x), bessel_I_deriv(nu, x)
        c = 0.5 + complex(x * (dI / I).value())
    A[rb] = 0
    A[rb, 0:off[1]] = D[-1]
    A[rb, rb] -= c
    rhs[rb] = 0.0
    # interfaces: value continuity in the upper panel's bottom row, slope
    # continuity in the lower panel's top row
    for p in range(1, len(panels)):
        low_top, up_bot = off[p - 1], off[p + 1] - 1
        A[up_bot] = 0
        A[up_bot, up_bot] = 1
        A[up_bot, low_top] = -1
        rhs[up_bot] = 0
        A[low_top] = 0
        A[low_top, off[p - 1]:off[p]] = panels[p - 1][1][0]
        A[low_top, off[p]:off[p + 1]] -= panels[p][1][-1]
        rhs[low_top] = 0
    sol = np.linalg.solve(A, rhs)
    return complex(sol[r0])


def gen_smatrix_vs_ndmap(prob: TruncatedProblem, y0: float, k_nd: Optional[float] = None,
                         modes: Optional[Sequence[int]] = None) -> float:
    """max_n |phi_n - Lambda (y d_y phi_n)| / |phi_n| on Gamma_0 = {y = y0}.

    phi_n is the generalized-data solution with a_n = 1; Lambda is the N-D
    map of y < y0 at k_nd (default: the same k).
    """
    if not y0 > 2:
        raise ValueError("Gamma_0 must sit at y0 > 2")
    if y0 < math.exp(prob.core[1]) - 1e-12:
        raise ValueError("Gamma_0 must lie above the core")
    k = prob.k
    rc = prob.r_cusp
    modes = list(range(0, prob.n_max + 1)) if modes is None else list(modes)
    gd = generalized_smatrix_apply(prob, {n: 1.0 for n in modes})
    worst = 0.0
    for n in modes:
        A = free_branch("cusp", "in", n, rc, k, y0)
        B = free_branch("cusp", "out", n, rc, k, y0)
        # phi / e^{A.log_scale}
        shift = gd.scale_exp[n] + B.log_scale - A.log_scale
        bb = gd.b_mantissa[n] * math.exp(shift) if gd.b_mantissa[n] != 0 else 0.0
        phi = A.mantissa - bb * B.mantissa
        dphi = A.dmantissa - bb * B.dmantissa
        lam = mode_ndmap(prob if k_nd is None else prob.with_k(k_nd), n, y0)
        worst = max(worst, abs(phi - lam * dphi) / abs(phi))
    return worst
