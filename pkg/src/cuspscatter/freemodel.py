"""Spectral engine of the free cylinder S^r x (0, inf) with metric (dx^2 + dy^2)/y^2.

Functions on the cylinder are stored mode by mode: ``u_n(y)`` is the
coefficient of the normalized circle eigenfunction e^{inx/r}/sqrt(2 pi r),
sampled on a grid uniform in t = log y.  The resolvent at z = k^2 +- i0 is
realized with the exact substitution nu = -+ik in the Green kernels.

Spectral data: the cusp component and the regular slot of mode 0 are both
coefficients of the n = 0 circle mode, so ``||F f||_h^2`` is the plain sum of
squared moduli of all slots.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .specfun import bessel_I, bessel_I_deriv, bessel_K, bessel_K_deriv, gamma_complex

__all__ = [
    "LogGrid",
    "ModeFunction",
    "SpectralDatum",
    "FreqConstants",
    "freq_constants",
    "nu_from_z",
    "green_kernel",
    "resolvent_apply",
    "resolvent_apply_fd",
    "fourier_bessel",
    "mellin",
    "spectral_transform",
    "parseval_defect",
    "AsymptoticProfile",
    "asymptotic_profile",
    "besov_norm",
    "windowed_average",
    "mode_records",
]


# ---------------------------------------------------------------------------
# grids and containers

@dataclass(frozen=True)
class LogGrid:
    """Grid uniform in t = log y on [y_min, y_max]."""

    y_min: float
    y_max: float
    n: int

    def __post_init__(self):
        if not 0 < self.y_min < self.y_max:
            raise ValueError("need 0 < y_min < y_max")
        if self.n < 3:
            raise ValueError("grid needs at least three points")

    @property
    def t(self) -> np.ndarray:
        return np.linspace(math.log(self.y_min), math.log(self.y_max), self.n)

    @property
    def y(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def h(self) -> float:
        return (math.log(self.y_max) - math.log(self.y_min)) / (self.n - 1)

    def weights(self) -> np.ndarray:
        """Trapezoid weights for int g(y) dy/y^2 = int g e^{-t} dt."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = self.h / 2
        return w * np.exp(-self.t)


@dataclass(frozen=True)
class ModeFunction:
    n: int
    grid: LogGrid
    samples: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        if self.samples.shape != (self.grid.n,):
            raise ValueError("samples must match the grid")

    @property
    def y(self) -> np.ndarray:
        return self.grid.y

    @property
    def eigenvalue(self) -> float:
        return (self.n / self.r) ** 2

    @property
    def zeta(self) -> float:
        return abs(self.n) / self.r


Modes = Mapping[int, ModeFunction]


def _as_modes(f) -> dict[int, ModeFunction]:
    if isinstance(f, ModeFunction):
        return {f.n: f}
    if isinstance(f, Mapping):
        return dict(f)
    return {m.n: m for m in f}


@dataclass(frozen=True)
class SpectralDatum:
    """Element of h = C + L^2(S): cusp coefficient plus regular mode coefficients."""

    cusp: complex
    regular: dict[int, complex] = field(default_factory=dict)

    def norm2(self) -> float:
        return abs(self.cusp) ** 2 + sum(abs(v) ** 2 for v in self.regular.values())

    def norm(self) -> float:
        return math.sqrt(self.norm2())


@dataclass(frozen=True)
class FreqConstants:
    k: float
    omega_plus: complex
    omega_minus: complex
    omega_c_plus: complex
    omega_c_minus: complex
    sigma_plus: complex
    sigma_minus: complex
    r: float = 1.0

    def C(self, n: int, sign: int) -> complex:
        """Constant C_n^{(sign)}(k) multiplying the regular transform."""
        if n == 0:
            w = self.omega_plus if sign > 0 else self.omega_minus
            return sign * 1j / (self.k * w) * math.sqrt(math.pi / 2)
        return cmath.exp(-sign * 1j * self.k * math.log(abs(n) / (2 * self.r)))


def freq_constants(k: float, r: float = 1.0) -> FreqConstants:
    if not k > 0:
        raise ValueError("k must be positive")
    base = math.pi / math.sqrt(2 * k * math.sinh(k * math.pi))
    wp = base / complex(gamma_complex(1 - 1j * k))
    wm = base / complex(gamma_complex(1 + 1j * k))
    wc = 1j / k * math.sqrt(math.pi / 2)
    return FreqConstants(k=k, omega_plus=wp, omega_minus=wm, omega_c_plus=wc,
                         omega_c_minus=-wc, sigma_plus=0.5 - 1j * k,
                         sigma_minus=0.5 + 1j * k, r=r)


def nu_from_z(z) -> complex:
    """Order nu with z = -nu^2.

    ``z`` is a complex number off [0, inf) (then Re nu > 0), or a tuple
    ``(k, sign)`` meaning k^2 + sign*i0, realized as nu = -sign*ik.
    """
    if isinstance(z, tuple):
        k, sign = z
        if not k > 0 or sign not in (1, -1):
            raise ValueError("boundary values need (k > 0, sign = +-1)")
        return -sign * 1j * k
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise ValueError("z on [0, inf) needs an explicit +-i0 tag: pass (k, sign)")
    nu = cmath.sqrt(-z)
    return nu if nu.real > 0 else -nu


# ---------------------------------------------------------------------------
# Green kernel and resolvent

def _branches(y: np.ndarray, zeta: float, nu: complex):
    """Scaled solutions A (outgoing at the cusp) and B (regular at y -> 0).

    Returns (a, alpha, b, beta) with A = a e^alpha, B = b e^beta, normalized
    so that G(y, y') = A(y_>) B(y_<).
    """
    if zeta == 0:
        if nu == 0:
            raise ValueError("zero mode at nu = 0 is the pole of the free kernel")
        ly = np.log(y)
        la = (0.5 - nu) * ly
        lb = (0.5 + nu) * ly - cmath.log(2 * nu)
        return np.exp(1j * la.imag), la.real, np.exp(1j * lb.imag), lb.real
    K = bessel_K(nu, zeta * y)
    I = bessel_I(nu, zeta * y)
    half = 0.5 * np.log(y)
    return K.mantissa, K.log_scale + half, I.mantissa, I.log_scale + half


def green_kernel(y, y2, zeta: float, nu: complex):
    """Free Green kernel of mode with eigenvalue zeta^2 (vectorized in y, y2)."""
    y = np.asarray(y, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if np.any(y <= 0) or np.any(y2 <= 0):
        raise ValueError("heights must be positive")
    nu = complex(nu)
    ys, yl = np.minimum(y, y2), np.maximum(y, y2)
    a, alpha, _, _ = _branches(np.atleast_1d(yl).ravel(), zeta, nu)
    _, _, b, beta = _branches(np.atleast_1d(ys).ravel(), zeta, nu)
    out = (a * b * np.exp(alpha + beta)).reshape(np.shape(ys))
    return out[()] if out.ndim == 0 else out


def _apply_kernel(samples: np.ndarray, grid: LogGrid, zeta: float, nu: complex) -> np.ndarray:
    y = grid.y
    g = samples * grid.weights()
    a, alpha, b, beta = _branches(y, zeta, nu)
    n = len(y)
    # u_i = A_i sum_{j<=i} B_j g_j + B_i sum_{j>i} A_j g_j, with running sums
    # rescaled at every step so that only ratios of neighbouring scales appear
    bg = (b * g).tolist()
    ag = (a * g).tolist()
    db = np.exp(beta[:-1] - beta[1:]).tolist()
    da = np.exp(alpha[1:] - alpha[:-1]).tolist()
    T = [0j] * n
    acc = 0j
    for i in range(n):
        acc = bg[i] + (db[i - 1] * acc if i else 0j)
        T[i] = acc
    U = [0j] * (n + 1)
    acc = 0j
    for i in range(n - 1, -1, -1):
        acc = ag[i] + (da[i] * acc if i < n - 1 else 0j)
        U[i] = acc
    T = np.array(T)
    U = np.array(U[1:n] + [0j])
    u = a * T * np.exp(alpha + beta)
    tail = np.zeros(n, dtype=complex)
    tail[:-1] = b[:-1] * U[:-1] * np.exp(beta[:-1] + alpha[1:])
    return u + tail


def resolvent_apply(f, z) -> dict[int, ModeFunction]:
    """R_free(z) f by quadrature against the mode Green kernels."""
    modes = _as_modes(f)
    nu = nu_from_z(z)
    out = {}
    for n, m in modes.items():
        if np.all(m.samples == 0):
            out[n] = ModeFunction(n, m.grid, np.zeros(m.grid.n, dtype=complex), m.r)
            continue
        out[n] = ModeFunction(n, m.grid, _apply_kernel(m.samples.astype(complex),
                                                       m.grid, m.zeta, nu), m.r)
    return out


def _log_derivs(y: float, zeta: float, nu: complex) -> tuple[complex, complex]:
    """t-log-derivatives of w = e^{-t/2} u for the regular and cusp branches."""
    if zeta == 0:
        return nu, -nu
    x = zeta * y
    I = bessel_I(nu, x)
    dI = bessel_I_deriv(nu, x)
    K = bessel_K(nu, x)
    dK = bessel_K_deriv(nu, x)
    left = complex(x * (dI / I).value())
    right = complex(x * (dK / K).value())
    return left, right


def resolvent_apply_fd(f, z) -> dict[int, ModeFunction]:
    """R_free(z) f by second-order differences in t with exact Robin ends.

    Solves -w'' + (zeta^2 e^{2t} + nu^2) w = e^{-t/2} f, u = e^{t/2} w, with the
    end conditions of the outgoing/regular branches; independent of the kernel
    quadrature and used as its oracle.
    """
    modes = _as_modes(f)
    nu = nu_from_z(z)
    out = {}
    for n, m in modes.items():
        grid = m.grid
        t, h = grid.t, grid.h
        N = grid.n
        V = m.zeta ** 2 * np.exp(2 * t) + nu ** 2
        cl = _log_derivs(grid.y[0], m.zeta, nu)[0]
        cr = _log_derivs(grid.y[-1], m.zeta, nu)[1]
        ab = np.zeros((3, N), dtype=complex)
        ab[1] = 2 / h ** 2 + V
        ab[0, 1:] = -1 / h ** 2
        ab[2, :-1] = -1 / h ** 2
        # ghost-point Robin closures
        ab[0, 1] = -2 / h ** 2
        ab[2, -2] = -2 / h ** 2
        ab[1, 0] += 2 * cl / h
        ab[1, -1] -= 2 * cr / h
        rhs = np.exp(-t / 2) * m.samples
        w = solve_banded((1, 1), ab, rhs.astype(complex))
        out[n] = ModeFunction(n, grid, np.exp(t / 2) * w, m.r)
    return out


def inner(u, v) -> complex:
    """L^2 inner product (u, v) = sum_n int u_n conj(v_n) dy/y^2."""
    um, vm = _as_modes(u), _as_modes(v)
    total = 0j
    for n, a in um.items():
        if n in vm:
            total += complex(np.sum(a.samples * np.conj(vm[n].samples) * a.grid.weights()))
    return total


# ---------------------------------------------------------------------------
# transforms

def fourier_bessel(f_n: ModeFunction, k: float) -> complex:
    if f_n.n == 0:
        raise ValueError("the Fourier-Bessel transform is defined for n != 0")
    y = f_n.y
    K = bessel_K(1j * k, f_n.zeta * y)
    kern = np.sqrt(y) * K.value().real
    pref = math.sqrt(2 * k * math.sinh(k * math.pi)) / math.pi
    return complex(pref * np.sum(kern * f_n.samples * f_n.grid.weights()))


def mellin(f_0: ModeFunction, k: float, sign: int) -> complex:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    y = f_0.y
    kern = y ** (0.5 + sign * 1j * k)
    return complex(np.sum(kern * f_0.samples * f_0.grid.weights()) / math.sqrt(2 * math.pi))


def spectral_transform(f, k: float) -> tuple[SpectralDatum, SpectralDatum]:
    """(F^{(+)} f, F^{(-)} f) at frequency k."""
    if not k > 0:
        raise ValueError("k must be positive")
    modes = _as_modes(f)
    r = next(iter(modes.values())).r if modes else 1.0
    fc = freq_constants(k, r)
    out = []
    for sign in (1, -1):
        cusp = 0j
        reg: dict[int, complex] = {}
        for n, m in modes.items():
            if n == 0:
                cusp = mellin(m, k, -sign)
                reg[0] = fc.C(0, sign) * mellin(m, k, sign)
            else:
                reg[n] = fc.C(n, sign) * fourier_bessel(m, k)
        out.append(SpectralDatum(cusp, reg))
    return out[0], out[1]


def parseval_defect(f, k: float, method: str = "fd") -> float:
    """|(k/(pi i)) ([R(k^2+i0) - R(k^2-i0)] f, f) - ||F^{(+)} f||^2|.

    The left side uses the finite-difference resolvent by default, so the
    defect measures discretization error; ``method="kernel"`` uses the
    kernel quadrature, which shares its quadrature with the transforms.
    """
    modes = _as_modes(f)
    solve = resolvent_apply_fd if method == "fd" else resolvent_apply
    up = solve(modes, (k, 1))
    um = solve(modes, (k, -1))
    jump = {n: ModeFunction(n, up[n].grid, up[n].samples - um[n].samples, up[n].r)
            for n in modes}
    lhs = k / (math.pi * 1j) * inner(jump, modes)
    fp, _ = spectral_transform(modes, k)
    return abs(lhs - fp.norm2())


# ---------------------------------------------------------------------------
# asymptotics and norms

@dataclass(frozen=True)
class AsymptoticProfile:
    end: str
    coefficient_fit: complex
    coefficient_theory: complex
    radii: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def coefficient_error(self) -> float:
        if self.coefficient_theory == 0:
            return abs(self.coefficient_fit)
        return abs(self.coefficient_fit - self.coefficient_theory) / abs(self.coefficient_theory)


def asymptotic_profile(f, k: float, end: str, radii: Sequence[float] = (10.0, 100.0, 1000.0),
                       sign: int = 1) -> AsymptoticProfile:
    """Compare R_free(k^2 +- i0) f with its leading asymptotic term at one end.

    ``f`` must live on a grid covering [1/max(radii), max(radii)].  The
    residual for radius R is (1/log R) int ||u - v||^2 dy/y^2 over [1, R]
    (cusp) or [1/R, 1] (regular).  The coefficient is fitted by least squares
    to the zero mode beyond the support of f and compared with the predicted
    omega * F value.
    """
    if end not in ("cusp", "regular"):
        raise ValueError("end must be 'cusp' or 'regular'")
    modes = _as_modes(f)
    grid = next(iter(modes.values())).grid
    y = grid.y
    if grid.y_max < max(radii) * (1 - 1e-12) or grid.y_min > 1 / max(radii) * (1 + 1e-12):
        raise ValueError("grid must cover [1/R, R] for the largest radius")
    u = resolvent_apply(modes, (k, sign))
    fc = freq_constants(k, next(iter(modes.values())).r)
    fplus, fminus = spectral_transform(modes, k)
    datum = fplus if sign > 0 else fminus
    support = np.zeros(grid.n, dtype=bool)
    for m in modes.values():
        support |= m.samples != 0
    idx = np.nonzero(support)[0]
    lo_s, hi_s = (y[idx[0]], y[idx[-1]]) if len(idx) else (1.0, 1.0)
    if end == "cusp":
        omega = fc.omega_c_plus if sign > 0 else fc.omega_c_minus
        power = 0.5 + sign * 1j * k
        theory = omega * datum.cusp
        lead = {0: theory * y ** power}
        fit_mask = y > hi_s * 1.01
    else:
        omega = fc.omega_plus if sign > 0 else fc.omega_minus
        power = 0.5 - sign * 1j * k
        theory = omega * datum.regular.get(0, 0j)
        lead = {n: omega * c * y ** power for n, c in datum.regular.items()}
        fit_mask = y < lo_s / 1.01
    u0 = u[0].samples if 0 in u else np.zeros(grid.n, dtype=complex)
    basis = y[fit_mask] ** power
    if basis.size:
        coef = complex(np.vdot(basis, u0[fit_mask]) / np.vdot(basis, basis))
    else:
        coef = complex("nan")
    w = grid.weights()
    diff2 = np.zeros(grid.n)
    for n, m in u.items():
        diff2 += np.abs(m.samples - lead.get(n, 0.0)) ** 2
    res = []
    for R in radii:
        mask = (y >= 1) & (y <= R * (1 + 1e-12)) if end == "cusp" else \
            (y <= 1) & (y >= 1 / R * (1 - 1e-12))
        res.append(float(np.sum(diff2[mask] * w[mask]) / math.log(R)))
    return AsymptoticProfile(end, coef, theory, tuple(float(r) for r in radii), tuple(res))


def _block_edges(k: int) -> tuple[float, float]:
    if k == 0:
        return math.exp(-1.0), math.e
    if k > 0:
        return math.exp(math.exp(k - 1)), math.exp(math.exp(k))
    return math.exp(-math.exp(-k)), math.exp(-math.exp(-k - 1))


def _pointwise_norm2(u) -> tuple[LogGrid, np.ndarray]:
    if isinstance(u, tuple):
        grid, vals = u
        vals = np.asarray(vals)
        n2 = np.abs(vals) ** 2 if vals.ndim == 1 else np.sum(np.abs(vals) ** 2, axis=1)
        return grid, n2
    modes = _as_modes(u)
    grid = next(iter(modes.values())).grid
    return grid, sum(np.abs(m.samples) ** 2 for m in modes.values())


def besov_norm(u, which: str = "B", s: float = 1.0) -> float:
    """Norms B, B* and L^{2,s} of an h-valued function.

    ``u`` is a mode collection or a pair (LogGrid, values) where values has
    shape (n,) or (n, dim).  Sums and sups are truncated to the grid range.
    """
    grid, n2 = _pointwise_norm2(u)
    y, w = grid.y, grid.weights()
    covered = [k for k in range(-6, 7)
               if _block_edges(k)[0] < grid.y_max and _block_edges(k)[1] > grid.y_min]
    if not all(k in covered for k in (-1, 0, 1)):
        raise ValueError("grid must reach into the blocks k = -1, 0, 1")
    if which == "B":
        total = 0.0
        for k in covered:
            a, b = _block_edges(k)
            m = (y > a) & (y <= b)
            total += math.exp(abs(k) / 2) * math.sqrt(float(np.sum(n2[m] * w[m])))
        return total
    if which == "Bstar":
        Rmax = min(grid.y_max, 1 / grid.y_min)
        if Rmax <= math.e:
            raise ValueError("grid too short for the B* supremum")
        best = 0.0
        for R in np.exp(np.linspace(1.0, math.log(Rmax), 200)):
            m = (y >= 1 / R * (1 - 1e-12)) & (y <= R * (1 + 1e-12))
            best = max(best, float(np.sum(n2[m] * w[m])) / math.log(R))
        return math.sqrt(best)
    if which == "L2s":
        return math.sqrt(float(np.sum((1 + np.abs(np.log(y))) ** (2 * s) * n2 * w)))
    raise ValueError(f"unknown norm {which!r}")


def windowed_average(u, R: float, rho=None) -> float:
    """(1/log R) int ||u||^2 dy/y^2 over [1/R, R], or the rho(log y/log R) weighted form."""
    grid, n2 = _pointwise_norm2(u)
    y, w = grid.y, grid.weights()
    L = math.log(R)
    if rho is None:
        m = (y >= 1 / R * (1 - 1e-12)) & (y <= R * (1 + 1e-12))
        return float(np.sum(n2[m] * w[m])) / L
    return float(np.sum(rho(np.log(y) / L) * n2 * w)) / L


def mode_records(u) -> list[tuple[int, float, float, float]]:
    """Rows (n, y, Re, Im) for serialization."""
    rows = []
    for n, m in sorted(_as_modes(u).items()):
        for yy, v in zip(m.y, m.samples):
            rows.append((n, float(yy), float(np.real(v)), float(np.imag(v))))
    return rows
