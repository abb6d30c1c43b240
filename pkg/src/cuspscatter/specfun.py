"""Modified Bessel functions of complex (mainly imaginary) order on x > 0.

Every public routine returns a :class:`ScaledBessel`, i.e. a mantissa and a
natural-log scale kept apart so that I-growth and K-decay can be combined
without overflow.  Supported orders satisfy ``|nu| <= 100``; outside that range,
or where the imaginary-order quadrature loses digits to cancellation, an
:class:`AccuracyWarning` is emitted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AccuracyWarning",
    "ScaledBessel",
    "bessel_I",
    "bessel_K",
    "bessel_I_deriv",
    "bessel_K_deriv",
    "gamma_complex",
    "loggamma_complex",
    "x_switch",
]

NU_MAX = 100.0
_LN2 = math.log(2.0)


class AccuracyWarning(UserWarning):
    """Raised when a Bessel evaluation is outside its validated accuracy range."""


@dataclass(frozen=True)
class ScaledBessel:
    """Value ``mantissa * exp(log_scale)`` with ``|mantissa|`` in [1/2, 2)."""

    mantissa: np.ndarray
    log_scale: np.ndarray

    @classmethod
    def normalized(cls, mantissa, log_scale) -> "ScaledBessel":
        m = np.asarray(mantissa, dtype=complex)
        s = np.asarray(log_scale, dtype=float) + np.zeros(m.shape)
        mag = np.abs(m)
        nz = mag > 0
        e = np.zeros(m.shape)
        e[nz] = np.floor(np.log2(mag[nz]))
        m = m * np.exp2(-e)
        s = np.where(nz, s + e * _LN2, 0.0)
        return cls(m, s)

    def value(self) -> np.ndarray:
        """Descaled value; may overflow to inf for extreme scales."""
        with np.errstate(over="ignore"):
            return self.mantissa * np.exp(self.log_scale)

    def scaled(self, shift) -> np.ndarray:
        """Return ``value * exp(-shift)`` computed without forming ``value``."""
        return self.mantissa * np.exp(self.log_scale - shift)

    def __mul__(self, other: "ScaledBessel") -> "ScaledBessel":
        return ScaledBessel.normalized(self.mantissa * other.mantissa,
                                       self.log_scale + other.log_scale)

    def __truediv__(self, other: "ScaledBessel") -> "ScaledBessel":
        return ScaledBessel.normalized(self.mantissa / other.mantissa,
                                       self.log_scale - other.log_scale)

    def log_abs(self) -> np.ndarray:
        return np.log(np.abs(self.mantissa)) + self.log_scale


# ---------------------------------------------------------------------------
# Gamma function

_BERNOULLI = [1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730,
              7.0 / 6, -3617.0 / 510, 43867.0 / 798, -174611.0 / 330]
_STIRLING_SHIFT = 12.0


def _is_pole(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def _loggamma_right(z: np.ndarray) -> np.ndarray:
    # shift Re z past the Stirling threshold, then sum the asymptotic series
    shift = np.maximum(np.ceil(_STIRLING_SHIFT - z.real), 0).astype(int)
    acc = np.zeros(z.shape, dtype=complex)
    w = z.copy()
    for j in range(int(shift.max(initial=0))):
        active = shift > j
        acc[active] += np.log(w[active])
        w[active] += 1.0
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros(z.shape, dtype=complex)
    p = inv.copy()
    for m, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * m * (2 * m - 1)) * p
        p = p * inv2
    return (w - 0.5) * np.log(w) - w + 0.5 * math.log(2 * math.pi) + series - acc


def loggamma_complex(z) -> np.ndarray:
    """log Gamma(z) for complex z (branch not tracked across the reflection)."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(_is_pole(z)):
        raise ValueError("gamma has a pole at non-positive integers")
    out = np.empty(z.shape, dtype=complex)
    left = z.real < 0.5
    right = ~left
    out[right] = _loggamma_right(z[right])
    if np.any(left):
        zl = z[left]
        out[left] = (math.log(math.pi) - np.log(np.sin(np.pi * zl))
                     - _loggamma_right(1.0 - zl))
    return out[0] if scalar else out


def gamma_complex(z) -> np.ndarray:
    """Gamma(z) via reflection and a shifted Stirling series."""
    return np.exp(loggamma_complex(z))


def _rgamma_log(z: complex) -> tuple[bool, complex]:
    """(is_zero, log) of 1/Gamma(z)."""
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == round(z.real):
        return True, 0j
    return False, -complex(loggamma_complex(z))


# ---------------------------------------------------------------------------
# Bessel functions

def x_switch(nu: complex) -> float:
    """Argument above which the large-x expansions are used."""
    return max(25.0, 3.0 * abs(nu))


def _check(nu, x):
    nu = complex(nu)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be positive and finite")
    if abs(nu) > NU_MAX:
        warnings.warn(f"|nu| = {abs(nu):.3g} exceeds the validated range {NU_MAX}",
                      AccuracyWarning, stacklevel=3)
    return nu, x


def _negint(nu: complex) -> bool:
    return nu.imag == 0 and nu.real < 0 and nu.real == round(nu.real)


def _I_series(nu: complex, x: np.ndarray) -> ScaledBessel:
    # leading power absorbed into the scale; the remaining sum is O(e^x) at most
    if _negint(nu):
        nu = -nu
    n0 = 0
    zero, lrg = _rgamma_log(nu + 1)
    while zero:
        n0 += 1
        zero, lrg = _rgamma_log(nu + n0 + 1)
    lt0 = (nu + 2 * n0) * np.log(x / 2.0) + lrg - math.lgamma(n0 + 1)
    q = x * x / 4.0
    term = np.ones(x.shape, dtype=complex)
    total = term.copy()
    n = n0
    nmax = n0 + int(2 * x.max() + abs(nu) + 60)
    while n < nmax:
        term = term * q / ((n + 1) * (nu + n + 1))
        total = total + term
        n += 1
        if n > abs(nu) + 2 and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return ScaledBessel.normalized(total * np.exp(1j * lt0.imag), lt0.real)


def _hankel_sum(nu: complex, x: np.ndarray, alternate: bool) -> np.ndarray:
    """Optimally truncated sum of a_m(nu) (+-1/x)^m."""
    mu = 4 * nu * nu
    term = np.ones(x.shape, dtype=complex)
    total = term.copy()
    best = np.abs(term)
    active = np.ones(x.shape, dtype=bool)
    sgn = -1.0 if alternate else 1.0
    for m in range(1, 200):
        new = term * (mu - (2 * m - 1) ** 2) / (8.0 * m) * (sgn / x)
        mag = np.abs(new)
        if m > abs(nu) + 1:
            active &= mag < best
        if not np.any(active):
            break
        total = np.where(active, total + new, total)
        best = np.where(active, mag, best)
        term = new
        if m > abs(nu) + 1:
            active &= mag > 1e-18 * np.abs(total)
        if not np.any(active):
            break
    return total


def _K_asym(nu: complex, x: np.ndarray) -> ScaledBessel:
    s = _hankel_sum(nu, x, alternate=False)
    return ScaledBessel.normalized(s * np.sqrt(np.pi / (2 * x)), -x)


def _K_quad(nu: complex, x: np.ndarray) -> ScaledBessel:
    # K_nu(x) e^x = int_0^inf exp(-x(cosh t - 1)) cosh(nu t) dt; the integrand
    # decays double exponentially and is even, so the trapezoid rule converges
    # geometrically once the step resolves the strip |Im t| < pi/2
    k = abs(nu.imag)
    h = min(0.1, math.pi ** 2 / (math.pi * k + 50.0),
            2 * math.pi / (k + 9.5 * math.sqrt(float(x.max()))))
    rr = abs(nu.real)
    xmin = float(x.min())
    t_hi = math.acosh(1.0 + (45.0 + rr * 50.0) / xmin) + 2.0
    t_hi = max(t_hi, 4.0)
    while xmin * (math.cosh(t_hi) - 1.0) - rr * t_hi < 45.0:
        t_hi += 0.5
    t = np.arange(0.0, t_hi + h, h)
    w = np.full(t.shape, h)
    w[0] = h / 2
    ch = np.cosh(nu * t)
    e = np.exp(-np.outer(x, np.cosh(t) - 1.0))
    val = e @ (w * ch)
    if nu.real == 0 and nu.imag != 0:
        # cancellation: the result is ~exp(-pi k/2) below the integrand size
        k = abs(nu.imag)
        peak = e @ w
        lost = np.max(peak / np.maximum(np.abs(val), 1e-300))
        if lost * 1e-16 > 1e-8:
            warnings.warn(f"K_ik quadrature at k={k:.3g} loses ~{math.log10(lost):.0f} digits",
                          AccuracyWarning, stacklevel=3)
        val = val.real + 0j
    return ScaledBessel.normalized(val, -x)


def _near_integer(nu: complex) -> bool:
    return abs(nu - round(nu.real)) < 1e-3


def bessel_I(nu, x) -> ScaledBessel:
    """I_nu(x) for x > 0: power series below x_switch, Hankel expansion above."""
    nu, x = _check(nu, x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    xs = x_switch(nu)
    small = x <= xs
    mant = np.empty(x.shape, dtype=complex)
    scale = np.empty(x.shape)
    if np.any(small):
        s = _I_series(nu, x[small])
        mant[small], scale[small] = s.mantissa, s.log_scale
    if np.any(~small):
        xl = x[~small]
        main = _hankel_sum(nu, xl, alternate=True) / np.sqrt(2 * np.pi * xl)
        # exponentially small part: I_nu = E(x) - sin(nu pi)/pi K_nu(x)
        c = np.sin(nu * np.pi) / np.pi
        if _negint(nu) or abs(c) == 0:
            corr = 0.0
        else:
            kq = _K_quad(nu, xl) if xl.min() < 60 else _K_asym(nu, xl)
            corr = -c * kq.mantissa * np.exp(kq.log_scale - xl)
        r = ScaledBessel.normalized(main + corr, xl)
        mant[~small], scale[~small] = r.mantissa, r.log_scale
    out = ScaledBessel.normalized(mant, scale)
    if scalar:
        return ScaledBessel(out.mantissa[0], out.log_scale[0])
    return out


def bessel_K(nu, x) -> ScaledBessel:
    """K_nu(x) for x > 0.

    Small x (x <= 2) and orders at distance > 1e-3 from the integers use the
    connection formula with I_{-nu}, I_nu; moderate x uses the integral
    representation; x above x_switch uses the large-argument expansion.
    """
    nu, x = _check(nu, x)
    if nu.real < 0 or (nu.real == 0 and nu.imag < 0):
        nu = -nu
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    xs = x_switch(nu)
    mant = np.empty(x.shape, dtype=complex)
    scale = np.empty(x.shape)
    # for imaginary order the connection formula stays stable while
    # 2x < pi k (I is then not yet dominated by its growing part)
    series_edge = 2.0
    if nu.real == 0:
        series_edge = max(series_edge, math.pi * abs(nu.imag) / 2 - 2.0)
    series = (x <= series_edge) & (not _near_integer(nu))
    asym = x > xs
    quad = ~series & ~asym
    if np.any(series):
        xx = x[series]
        ip = _I_series(nu, xx)
        im = _I_series(-nu, xx)
        ref = np.maximum(ip.log_scale, im.log_scale)
        diff = im.scaled(ref) - ip.scaled(ref)
        val = (np.pi / 2) * diff / np.sin(nu * np.pi)
        if nu.real == 0:
            val = val.real + 0j
        r = ScaledBessel.normalized(val, ref)
        mant[series], scale[series] = r.mantissa, r.log_scale
    if np.any(quad):
        r = _K_quad(nu, x[quad])
        mant[quad], scale[quad] = r.mantissa, r.log_scale
    if np.any(asym):
        r = _K_asym(nu, x[asym])
        mant[asym], scale[asym] = r.mantissa, r.log_scale
    if nu.real == 0 or nu.imag == 0:
        mant = mant.real + 0j
    out = ScaledBessel.normalized(mant, scale)
    if scalar:
        return ScaledBessel(out.mantissa[0], out.log_scale[0])
    return out


def _combine(a: ScaledBessel, b: ScaledBessel, ca: complex, cb: complex) -> ScaledBessel:
    ref = np.maximum(a.log_scale, b.log_scale)
    return ScaledBessel.normalized(ca * a.scaled(ref) + cb * b.scaled(ref), ref)


def bessel_I_deriv(nu, x) -> ScaledBessel:
    """I_nu'(x) = (I_{nu-1}(x) + I_{nu+1}(x)) / 2."""
    nu = complex(nu)
    out = _combine(bessel_I(nu - 1, x), bessel_I(nu + 1, x), 0.5, 0.5)
    if np.ndim(x) == 0:
        return ScaledBessel(out.mantissa[()], out.log_scale[()])
    return out


def bessel_K_deriv(nu, x) -> ScaledBessel:
    """K_nu'(x) = -(K_{nu-1}(x) + K_{nu+1}(x)) / 2."""
    nu = complex(nu)
    out = _combine(bessel_K(nu - 1, x), bessel_K(nu + 1, x), -0.5, -0.5)
    if nu.real == 0:
        out = ScaledBessel(out.mantissa.real + 0j, out.log_scale)
    if np.ndim(x) == 0:
        return ScaledBessel(out.mantissa[()], out.log_scale[()])
    return out
