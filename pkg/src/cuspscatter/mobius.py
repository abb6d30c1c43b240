"""SL(2,R) acting on the upper half-plane by fractional linear maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "MoebiusTransform",
    "PointH",
    "BoundaryPoint",
    "TransformClass",
    "identity",
    "translate",
    "dilation",
    "rotation",
    "compose",
    "inverse",
    "apply",
    "classify",
    "fixed_points",
    "elliptic_order",
    "hyperbolic_distance",
]

PARABOLIC_TOL = 1e-10
ORDER_TOL = 1e-9


@dataclass(frozen=True)
class PointH:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError(f"point must lie in the open upper half-plane, got y={self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "PointH":
        return cls(z.real, z.imag)


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of R ∪ {∞}; ``value is None`` encodes ∞."""

    value: float | None

    @property
    def is_infinity(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return "inf" if self.value is None else f"{self.value:.12g}"


@dataclass(frozen=True)
class MoebiusTransform:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not det > 0:
            raise ValueError(f"determinant must be positive, got {det}")
        s = 1.0 / math.sqrt(det)
        entries = [self.a * s, self.b * s, self.c * s, self.d * s]
        first = next(e for e in entries if e != 0.0)
        if first < 0:
            entries = [-e for e in entries]
        for name, val in zip("abcd", entries):
            object.__setattr__(self, name, val + 0.0)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def matrix(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.a, self.b), (self.c, self.d))

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (abs(self.a - 1) < tol and abs(self.d - 1) < tol
                and abs(self.b) < tol and abs(self.c) < tol)

    def close_to(self, other: "MoebiusTransform", tol: float = 1e-12) -> bool:
        p = (self.a, self.b, self.c, self.d)
        q = (other.a, other.b, other.c, other.d)
        return all(abs(u - v) < tol for u, v in zip(p, q))


@dataclass(frozen=True)
class TransformClass:
    tag: str
    angle: float | None = None
    order: int | None = None

    def __str__(self) -> str:
        if self.tag == "elliptic":
            if self.order is not None:
                return f"elliptic, order {self.order}"
            return f"elliptic, angle {self.angle:.12g}"
        return self.tag


def identity() -> MoebiusTransform:
    return MoebiusTransform(1.0, 0.0, 0.0, 1.0)


def translate(tau: float) -> MoebiusTransform:
    return MoebiusTransform(1.0, tau, 0.0, 1.0)


def dilation(lam: float) -> MoebiusTransform:
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    s = math.sqrt(lam)
    return MoebiusTransform(s, 0.0, 0.0, 1.0 / s)


def rotation(phi: float) -> MoebiusTransform:
    """Elliptic element fixing i; rotates the tangent plane at i by 2*phi."""
    return MoebiusTransform(math.cos(phi), math.sin(phi), -math.sin(phi), math.cos(phi))


def compose(g: MoebiusTransform, h: MoebiusTransform) -> MoebiusTransform:
    """g ∘ h, i.e. the matrix product g·h."""
    return MoebiusTransform(g.a * h.a + g.b * h.c, g.a * h.b + g.b * h.d,
                            g.c * h.a + g.d * h.c, g.c * h.b + g.d * h.d)


def inverse(g: MoebiusTransform) -> MoebiusTransform:
    return MoebiusTransform(g.d, -g.b, -g.c, g.a)


def apply(g: MoebiusTransform, z: PointH) -> PointH:
    zc = z.z
    den = g.c * zc + g.d
    if den == 0:
        raise ValueError("pole of the transform at this point")
    w = (g.a * zc + g.b) / den
    # Im(g z) = Im z / |cz + d|^2 exactly when det = 1
    return PointH(w.real, z.y / abs(den) ** 2)


def _elliptic_angle(g: MoebiusTransform) -> float:
    # conjugate to rotation(phi) with tr = 2 cos(phi); the sign of c picks the
    # sense of rotation, and the induced rotation at the fixed point is 2 phi
    phi = math.acos(max(-1.0, min(1.0, g.trace / 2.0)))
    angle = 2.0 * phi
    if g.c > 0:
        angle = 2.0 * math.pi - angle
    return angle % (2.0 * math.pi)


def classify(g: MoebiusTransform) -> TransformClass:
    if g.is_identity():
        return TransformClass("identity")
    t = abs(g.trace)
    if abs(t - 2.0) <= PARABOLIC_TOL:
        return TransformClass("parabolic")
    if t < 2.0:
        angle = _elliptic_angle(g)
        order = _rational_order(angle, 1000)
        return TransformClass("elliptic", angle=angle, order=order)
    return TransformClass("hyperbolic")


def fixed_points(g: MoebiusTransform) -> Union[PointH, tuple[BoundaryPoint, ...]]:
    """Interior fixed point for elliptic g, else the fixed points on R ∪ {∞}."""
    cls = classify(g)
    if cls.tag == "identity":
        raise ValueError("identity fixes every point")
    a, b, c, d = g.a, g.b, g.c, g.d
    if cls.tag == "elliptic":
        disc = (d - a) ** 2 + 4 * b * c
        root = complex(0.0, math.sqrt(-disc))
        z1 = (a - d + root) / (2 * c)
        z2 = (a - d - root) / (2 * c)
        return PointH.from_complex(z1 if z1.imag > 0 else z2)
    if abs(c) < 1e-14:
        # z -> (a z + b)/d fixes infinity; a tiny c puts the second root out of range, plus b/(d-a) when a != d
        if abs(a - d) < 1e-14:
            return (BoundaryPoint(None),)
        return (BoundaryPoint(b / (d - a)), BoundaryPoint(None))
    disc = (d - a) ** 2 + 4 * b * c
    if cls.tag == "parabolic":
        return (BoundaryPoint((a - d) / (2 * c)),)
    r = math.sqrt(disc)
    return tuple(sorted((BoundaryPoint((a - d - r) / (2 * c)),
                         BoundaryPoint((a - d + r) / (2 * c))),
                        key=lambda p: p.value))


def _rational_order(angle: float, max_order: int) -> int | None:
    frac = angle / (2.0 * math.pi)
    approx = Fraction(frac).limit_denominator(max_order)
    if approx.denominator == 0:
        return None
    if abs(2.0 * math.pi * float(approx) - angle) < ORDER_TOL:
        return approx.denominator
    return None


def elliptic_order(g: MoebiusTransform, max_order: int = 50) -> int | str:
    """Order of g in PSL(2,R) if finite and at most ``max_order``."""
    cls = classify(g)
    if cls.tag != "elliptic":
        raise ValueError(f"elliptic element required, got {cls.tag}")
    n = _rational_order(cls.angle, max_order)
    return "irrational" if n is None else n


def hyperbolic_distance(z: PointH, w: PointH) -> float:
    num = (z.x - w.x) ** 2 + (z.y - w.y) ** 2
    # acosh(1 + u) loses digits near u = 0, so go through the sinh form
    s = math.sqrt(num / (4.0 * z.y * w.y))
    return 2.0 * math.asinh(s)
