"""Boundary-control toolkit on meshed interiors.

The discrete operator is H = M^{-1} K + shift on a P1 mesh with lumped mass
M, Neumann conditions everywhere, and the boundary piece Gamma carrying the
data.  Every wave quantity is synthesised spectrally from the eigenpairs, so
boundary-only formulas agree with interior ones up to rounding.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import charts
from .mesh import TriMesh, excise, mesh_distance, sublevel_area

__all__ = [
    "BSP",
    "NDMap",
    "TimeBasis",
    "Source",
    "InfluenceSpec",
    "InfluenceResult",
    "ExcisionResult",
    "Detection",
    "DetectionReport",
    "eig_bsp",
    "nd_map",
    "nd_map_direct",
    "nd_residue",
    "boundary_modes",
    "wave_solve",
    "wave_field",
    "blago_inner",
    "blago_inner_direct",
    "blago_mass",
    "influence_area",
    "excise_greens",
    "greens_with_hole",
    "phi_related_check",
    "detect_singularities",
]

SHIFT = -0.25
_MAGIC = b"BSP1"


# ---------------------------------------------------------------------------
# boundary spectral projection

@dataclass(frozen=True)
class BSP:
    """Eigenvalues of H with the Gamma traces of mass-orthonormal eigenvectors.

    ``interior`` holds the full eigenvectors and the lumped mass; it is kept
    only so interior quantities can be checked against boundary formulas.
    """

    eigenvalues: np.ndarray          # (n,)
    traces: np.ndarray               # (n, m) on the Gamma nodes
    weights: np.ndarray              # (m,) lumped length element
    arclength: np.ndarray            # (m,)
    shift: float = SHIFT
    groups: tuple = ()
    h: float = float("nan")
    nodes: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    interior: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.groups:
            object.__setattr__(self, "groups", _group(self.eigenvalues))

    @property
    def n_eigs(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_gamma(self) -> int:
        return len(self.weights)

    @property
    def multiplicities(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def group_values(self) -> np.ndarray:
        return np.array([self.eigenvalues[list(g)].mean() for g in self.groups])

    def kernel(self, g: int) -> np.ndarray:
        """sum_j phi_j(x) phi_j(y) over group g, sampled on Gamma x Gamma."""
        P = self.traces[list(self.groups[g])]
        return P.T @ P

    def save(self, path, text: bool = False) -> None:
        if text:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(f"# bsp n_eigs={self.n_eigs} n_gamma={self.n_gamma} shift={self.shift!r}\n")
                fh.write("weights " + " ".join(repr(float(v)) for v in self.weights) + "\n")
                fh.write("arclength " + " ".join(repr(float(v)) for v in self.arclength) + "\n")
                for lam, tr in zip(self.eigenvalues, self.traces):
                    fh.write(repr(float(lam)) + " " + " ".join(repr(float(v)) for v in tr) + "\n")
            return
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<iid", self.n_eigs, self.n_gamma, self.shift))
            fh.write(np.asarray(self.weights, "<f8").tobytes())
            fh.write(np.asarray(self.arclength, "<f8").tobytes())
            for lam, tr in zip(self.eigenvalues, self.traces):
                fh.write(struct.pack("<d", lam))
                fh.write(np.asarray(tr, "<f8").tobytes())

    @classmethod
    def load(cls, path) -> "BSP":
        with open(path, "rb") as fh:
            head = fh.read(4)
            if head == _MAGIC:
                n, m, shift = struct.unpack("<iid", fh.read(16))
                w = np.frombuffer(fh.read(8 * m), "<f8").copy()
                s = np.frombuffer(fh.read(8 * m), "<f8").copy()
                rec = np.frombuffer(fh.read(8 * n * (m + 1)), "<f8").reshape(n, m + 1)
                return cls(rec[:, 0].copy(), rec[:, 1:].copy(), w, s, shift)
        with open(path, encoding="utf-8") as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        head = dict(kv.split("=") for kv in lines[0][2:])
        w = np.array(lines[1][1:], float)
        s = np.array(lines[2][1:], float)
        rec = np.array(lines[3:], float).reshape(int(head["n_eigs"]), -1)
        return cls(rec[:, 0].copy(), rec[:, 1:].copy(), w, s, float(head["shift"]))


def _group(lam: np.ndarray, gap: float = 1e-8) -> tuple:
    groups, cur = [], [0] if len(lam) else []
    for i in range(1, len(lam)):
        if abs(lam[i] - lam[i - 1]) <= gap * max(abs(lam[i]), 1.0):
            cur.append(i)
        else:
            groups.append(tuple(cur))
            cur = [i]
    if cur:
        groups.append(tuple(cur))
    return tuple(groups)


def eig_bsp(mesh: TriMesh, gamma, n_eigs: Optional[int], shift: float = SHIFT,
            keep_interior: bool = True, nyquist: Optional[float] = 0.5) -> BSP:
    """Lowest eigenpairs of the Neumann problem and their traces on ``gamma``.

    ``gamma`` names boundary tags of the mesh.  ``n_eigs`` None takes the full
    spectrum with a dense solver.  A multiplet straddling the cut is dropped,
    so fewer than ``n_eigs`` pairs may come back.  Modes with lambda h^2 above
    ``nyquist`` are not resolved by the mesh and raise; None skips the check
    (for algebraic identities of the discrete operator).
    """
    K = mesh.stiffness()
    m = mesh.lumped_mass()
    N = mesh.n_nodes
    if n_eigs is None or n_eigs >= N - 1:
        s = 1 / np.sqrt(m)
        mu, V = sla.eigh((K.toarray() * s[:, None]) * s[None, :])
        V = V * s[:, None]
    else:
        v0 = np.random.default_rng(0).standard_normal(N)
        k = min(n_eigs + 4, N - 2)
        mu, V = spla.eigsh(K.tocsc(), k=k, M=sp.diags(m).tocsc(), sigma=-1.0,
                           which="LM", v0=v0, tol=0.0)
        order = np.argsort(mu)
        mu, V = mu[order], V[:, order]
        # a multiplet cut by the truncation would give a wrong projection: drop it
        keep = n_eigs
        for g in _group(mu):
            if g[0] < n_eigs <= g[-1]:
                keep = g[0]
        mu, V = mu[:keep], V[:, :keep]
        # re-orthonormalise against the lumped mass
        V = V / np.sqrt(np.einsum("ij,i,ij->j", V, m, V))[None, :]
    h = mesh.h
    if nyquist is not None and mu[-1] * h * h > nyquist:
        raise ValueError(f"mesh too coarse for {len(mu)} modes: lambda h^2 = {mu[-1] * h * h:.3g} > {nyquist}")
    mu = np.where(np.abs(mu) < 1e-10 * max(1.0, abs(mu[-1])), 0.0, mu)
    # deterministic signs: largest-magnitude entry positive
    idx = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[idx, np.arange(V.shape[1])])[None, :]
    nodes, w = mesh.boundary_weights(gamma)
    _, s_arc = mesh.boundary_arclength(gamma)
    interior = (V, m) if keep_interior else None
    return BSP(mu + shift, V[nodes].T.copy(), w, s_arc, shift, h=h, nodes=nodes, interior=interior)


# ---------------------------------------------------------------------------
# Neumann-to-Dirichlet map

@dataclass(frozen=True)
class NDMap:
    """Lambda(z): Neumann data on Gamma to Dirichlet trace, ``matrix = kernel diag(w)``."""

    z: complex
    kernel: np.ndarray
    weights: np.ndarray
    tail: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return self.kernel * self.weights[None, :]

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def symmetry_defect(self) -> float:
        K = self.kernel
        return float(np.abs(K - K.T).max() / np.abs(K).max())


def nd_map(bsp: BSP, z: complex, min_dist: float = 1e-6) -> NDMap:
    lam = bsp.eigenvalues
    d = np.abs(lam - z).min()
    if d < min_dist:
        raise ValueError(f"z = {z} lies within {d:.2e} of an eigenvalue")
    c = 1 / (lam - z)
    Ker = (bsp.traces.T * c[None, :]) @ bsp.traces
    # size of the last decade of terms, as a proxy for the truncated tail
    k0 = max(0, int(0.9 * len(lam)))
    tail_part = (bsp.traces[k0:].T * c[None, k0:]) @ bsp.traces[k0:]
    tail = float(np.abs(tail_part).max() / max(np.abs(Ker).max(), 1e-300))
    if np.isrealobj(Ker) or np.all(np.imag(c) == 0):
        Ker = np.real_if_close(Ker)
    return NDMap(z, Ker, bsp.weights.copy(), tail)


def _operator(mesh: TriMesh, z: complex, shift: float) -> sp.csc_matrix:
    m = mesh.lumped_mass()
    A = mesh.stiffness() + sp.diags((shift - z) * m)
    return A.tocsc()


def nd_map_direct(mesh: TriMesh, gamma, z: complex, shift: float = SHIFT) -> NDMap:
    """Same map from a sparse solve (K + (shift - z) M) u = W_Gamma f."""
    nodes, w = mesh.boundary_weights(gamma)
    lu = spla.splu(_operator(mesh, z, shift))
    E = np.zeros((mesh.n_nodes, len(nodes)), dtype=complex if np.iscomplexobj(z) or np.imag(z) else float)
    E[nodes, np.arange(len(nodes))] = 1.0
    U = lu.solve(E)
    return NDMap(z, U[nodes], w)


def nd_residue(bsp: BSP, center: float, radius: float, n_quad: int = 64) -> np.ndarray:
    """(1 / 2 pi i) times the contour integral of the Lambda kernel on a circle."""
    th = 2 * np.pi * (np.arange(n_quad) + 0.5) / n_quad
    out = 0
    for t in th:
        z = center + radius * np.exp(1j * t)
        out = out + nd_map(bsp, z).kernel * (radius * np.exp(1j * t)) / n_quad
    return np.real_if_close(out, tol=1e6)


# ---------------------------------------------------------------------------
# sources and wave synthesis

def _B_integral(s: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """int_0^s B(tau, lam) d tau, zero for s <= 0."""
    s = np.maximum(s, 0.0)
    out = np.empty(np.broadcast(s, lam).shape)
    s, lam = np.broadcast_arrays(s, lam)
    pos, neg, zero = lam > 0, lam < 0, lam == 0
    q = np.sqrt(np.abs(lam))
    out[pos] = 2 * np.sin(0.5 * q[pos] * s[pos]) ** 2 / lam[pos]
    out[neg] = 2 * np.sinh(0.5 * q[neg] * s[neg]) ** 2 / np.abs(lam[neg])
    out[zero] = 0.5 * s[zero] ** 2
    return out


def B_kernel(t, lam):
    """sin(sqrt(lam) t)/sqrt(lam), t or sinh(sqrt(|lam|) t)/sqrt(|lam|)."""
    t, lam = np.broadcast_arrays(np.asarray(t, float), np.asarray(lam, float))
    q = np.sqrt(np.abs(lam))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(lam > 0, np.sin(q * t) / np.where(q > 0, q, 1),
                        np.where(lam < 0, np.sinh(q * t) / np.where(q > 0, q, 1), t))


@dataclass(frozen=True)
class TimeBasis:
    """Functions on (0, T): ``pc`` piecewise constants, ``sine`` sin(p pi t / T), ``legendre``."""

    kind: str
    T: float
    size: int

    def __post_init__(self):
        if self.kind not in ("pc", "sine", "legendre"):
            raise ValueError(f"unknown time basis {self.kind!r}")
        if not self.T > 0 or self.size < 1:
            raise ValueError("time basis needs T > 0 and size >= 1")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.size + 1)

    def values(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        inside = (t >= 0) & (t < self.T)
        p = np.arange(self.size)[:, None]
        if self.kind == "pc":
            e = self.edges
            out = (t[None, :] >= e[:-1, None]) & (t[None, :] < e[1:, None])
            return out.astype(float)
        if self.kind == "sine":
            return np.sin((p + 1) * np.pi * t[None, :] / self.T) * inside
        x = 2 * t / self.T - 1
        return np.polynomial.legendre.legvander(x, self.size - 1).T * inside

    def beta(self, t: float, lam: np.ndarray) -> np.ndarray:
        """int_0^t B(t - t', lam) tau_p(t') dt' as a (size, n) array."""
        lam = np.atleast_1d(np.asarray(lam, float))
        if t <= 0:
            return np.zeros((self.size, len(lam)))
        if self.kind == "pc":
            e = self.edges[:, None]
            return _B_integral(t - e[:-1], lam[None, :]) - _B_integral(t - e[1:], lam[None, :])
        # composite Gauss rule, 64 nodes per unit time, panels split at T
        stops = [0.0] + ([self.T] if t > self.T else []) + [t]
        out = np.zeros((self.size, len(lam)))
        for a, b in zip(stops[:-1], stops[1:]):
            npan = max(1, math.ceil(b - a))
            x, w = np.polynomial.legendre.leggauss(64)
            for k in range(npan):
                lo = a + (b - a) * k / npan
                hi = a + (b - a) * (k + 1) / npan
                tq = 0.5 * (hi - lo) * (x + 1) + lo
                wq = 0.5 * (hi - lo) * w
                out += (self.values(tq) * wq[None, :]) @ B_kernel(t - tq[:, None], lam[None, :])
        return out


@dataclass(frozen=True)
class Source:
    """f(x, t) = sum_{q,p} coeffs[q, p] spatial[:, q](x) tau_p(t) on the Gamma nodes."""

    spatial: np.ndarray    # (m, Q)
    basis: TimeBasis
    coeffs: np.ndarray     # (Q, P)

    def __post_init__(self):
        if self.coeffs.shape != (self.spatial.shape[1], self.basis.size):
            raise ValueError("coefficient shape does not match the source space")

    def value(self, t) -> np.ndarray:
        return self.spatial @ self.coeffs @ self.basis.values(t)

    def scaled(self, c: complex) -> "Source":
        return Source(self.spatial, self.basis, c * self.coeffs)


def boundary_modes(bsp: BSP, n_modes: int, sub: Optional[tuple[float, float]] = None,
                   closed: bool = False) -> np.ndarray:
    """Cosine modes on the arclength window ``sub`` (Fourier modes when ``closed``), zero outside."""
    s = bsp.arclength
    if sub is None:
        sub = (float(s.min()), float(s.max()) + (_closing_gap(bsp) if closed else 0.0))
    a, b = sub
    inside = (s >= a - 1e-12) & (s <= b + 1e-12)
    x = (s - a) / (b - a)
    cols = []
    for j in range(n_modes):
        if closed:
            q = (j + 1) // 2
            col = np.cos(2 * np.pi * q * x) if j % 2 == 0 else np.sin(2 * np.pi * q * x)
        else:
            col = np.cos(np.pi * j * x)
        cols.append(col * inside)
    return np.stack(cols, 1)


def _closing_gap(bsp: BSP) -> float:
    # for a closed loop the last node connects back to the first
    w_total = bsp.weights.sum()
    return float(w_total - (bsp.arclength.max() - bsp.arclength.min()))


def _modal_load(bsp: BSP, f: Source) -> np.ndarray:
    """(n, Q, P): <phi_n, spatial_q>_Gamma times coeffs."""
    proj = bsp.traces @ (bsp.weights[:, None] * f.spatial)
    return proj[:, :, None] * f.coeffs[None, :, :]


def wave_solve(bsp: BSP, f: Source, t: float) -> np.ndarray:
    """Modal coefficients a_n(t) of u^f(t) = sum a_n phi_n."""
    beta = f.basis.beta(t, bsp.eigenvalues)           # (P, n)
    L = _modal_load(bsp, f)                            # (n, Q, P)
    return np.einsum("nqp,pn->n", L, beta)


def wave_field(bsp: BSP, f: Source, t: float) -> np.ndarray:
    """Interior nodal values of u^f(t); needs the stored eigenvectors."""
    if bsp.interior is None:
        raise ValueError("interior eigenvectors were not kept")
    return bsp.interior[0] @ wave_solve(bsp, f, t)


def _gamma_density(bsp: BSP, f: Source, beta: np.ndarray, g: int) -> np.ndarray:
    """W (sum_p f_p beta_p(t, lambda_g)) on Gamma."""
    lam_col = beta[:, g]
    return bsp.weights * (f.spatial @ (f.coeffs @ lam_col))


def blago_inner(bsp: BSP, f: Source, h: Source, t: float, s: float) -> complex:
    """(u^f(t), u^h(s)) from the eigenvalues and Gamma kernels only."""
    lam_g = bsp.group_values
    bf = f.basis.beta(t, lam_g)
    bh = h.basis.beta(s, lam_g)
    total = 0j
    for g in range(len(bsp.groups)):
        F = _gamma_density(bsp, f, bf, g)
        H = _gamma_density(bsp, h, bh, g)
        total += F @ bsp.kernel(g) @ np.conj(H)
    return complex(total)


def blago_inner_direct(bsp: BSP, mesh: TriMesh, gamma, f: Source, h: Source, t: float, s: float,
                       per_panel: int = 32) -> complex:
    """(u^f(t), u^h(s)) from interior fields built by time quadrature of the modal equations."""
    if bsp.interior is None:
        raise ValueError("interior eigenvectors were not kept")
    V, m = bsp.interior
    nodes, w = mesh.boundary_weights(gamma)

    def field_at(src: Source, tt: float) -> np.ndarray:
        load = np.zeros((mesh.n_nodes, src.spatial.shape[1]), dtype=complex)
        load[nodes] = w[:, None] * src.spatial
        proj = V.T @ load                                  # (n, Q)
        cuts = np.unique(np.clip(np.concatenate([src.basis.edges if src.basis.kind == "pc" else [0, src.basis.T],
                                                 [tt]]), 0, tt))
        x, wq = np.polynomial.legendre.leggauss(per_panel)
        a = np.zeros(V.shape[1], dtype=complex)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            tq = 0.5 * (hi - lo) * (x + 1) + lo
            ww = 0.5 * (hi - lo) * wq
            # midpoint evaluation keeps piecewise constants on the right panel
            tau = src.basis.values(tq)                     # (P, q)
            g = proj @ src.coeffs @ tau                    # (n, q)
            a += (B_kernel(tt - tq[None, :], bsp.eigenvalues[:, None]) * g) @ ww
        return V @ a

    uf = field_at(f, t)
    uh = field_at(h, s)
    return complex(np.sum(uf * m * np.conj(uh)))


def blago_mass(bsp: BSP, f: Source, t: float) -> complex:
    """(u^f(t), 1) = int_Gamma int_0^t B(t - t', shift) f(x, t') dt' dl.

    The constant is an eigenfunction of H with eigenvalue ``shift``, so the
    linear kernel t - t' appears exactly when the shift is zero.
    """
    beta = f.basis.beta(t, np.array([bsp.shift]))[:, 0]
    return complex(bsp.weights @ f.spatial @ f.coeffs @ beta)


# ---------------------------------------------------------------------------
# domain of influence

@dataclass(frozen=True)
class InfluenceSpec:
    T: float
    sub: Optional[tuple[float, float]] = None   # arclength window of the sub-curve
    n_space: int = 1
    n_time: Optional[int] = None   # None: tie the time resolution to the spectral band
    time_kind: str = "pc"
    band_factor: float = 3.0
    closed: bool = False
    alphas: tuple = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    extrapolate: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.sub is not None and not self.sub[1] > self.sub[0]:
            raise ValueError("empty sub-curve")
        if any(a <= 0 for a in self.alphas) or list(self.alphas) != sorted(self.alphas, reverse=True):
            raise ValueError("alphas must be positive and decreasing")


@dataclass(frozen=True)
class InfluenceResult:
    T: float
    area: float
    alpha_used: float
    iters: int
    ladder: tuple                # (alpha, -I_T) pairs
    coeffs: np.ndarray = field(repr=False)
    spatial: np.ndarray = field(repr=False)
    basis: TimeBasis = None

    @property
    def source(self) -> Source:
        return Source(self.spatial, self.basis, self.coeffs)

    @property
    def min_functional(self) -> float:
        """Smallest I_T over the minimising sequence."""
        return -max(v for _, v in self.ladder)


def time_resolution(bsp: BSP, spec: InfluenceSpec) -> int:
    """Number of time functions.

    A time basis finer than the shortest wavelength the computed modes can
    represent lets the truncated system steer energy outside the domain of
    influence; cells of length ``band_factor / sqrt(lambda_max)`` keep the
    minimising sequence causal.
    """
    if spec.n_time is not None:
        return spec.n_time
    lam_max = bsp.eigenvalues[-1] - bsp.shift
    return max(1, int(spec.T * math.sqrt(max(lam_max, 0.0)) / spec.band_factor))


def _influence_system(bsp: BSP, spec: InfluenceSpec):
    S = boundary_modes(bsp, spec.n_space, spec.sub, spec.closed)
    basis = TimeBasis(spec.time_kind, spec.T, time_resolution(bsp, spec))
    proj = bsp.traces @ (bsp.weights[:, None] * S)             # (n, Q)
    beta = basis.beta(spec.T, bsp.eigenvalues)                  # (P, n)
    A = (proj[:, :, None] * beta.T[:, None, :]).reshape(len(bsp.eigenvalues), -1)
    b0 = basis.beta(spec.T, np.array([bsp.shift]))[:, 0]        # (P,)
    g = ((bsp.weights @ S)[:, None] * b0[None, :]).ravel()
    return S, basis, A, g


def _minimise(bsp: BSP, spec: InfluenceSpec, n_time: int):
    S, basis, A, g = _influence_system(bsp, replace(spec, n_time=n_time))
    G = A.T @ A
    d = np.sqrt(np.maximum(np.diag(G), 1e-300))
    Gn = G / d[:, None] / d[None, :]
    gn = g / d
    evals, Q = np.linalg.eigh(Gn)
    qg = Q.T @ gn
    scale = max(evals.max(), 1e-300)
    ladder, coeffs = [], None
    for a in spec.alphas:
        c = Q @ (qg / (evals + a * scale))
        grad = (Gn + a * scale * np.eye(len(gn))) @ c - gn
        if np.linalg.norm(grad) > 1e-10 * max(np.linalg.norm(gn), 1.0):
            raise RuntimeError(f"normal equations not solved at alpha={a:g}")
        ladder.append((a, float(2 * gn @ c - c @ Gn @ c)))
        coeffs = c
    return S, basis, (coeffs / d).reshape(S.shape[1], basis.size), tuple(ladder)


def influence_area(bsp: BSP, spec: InfluenceSpec) -> InfluenceResult:
    """Area of the domain of influence by minimising ||u(T)||^2 - 2 (u(T), 1).

    The Gram matrix of u(T) over the source basis is formed from the modal
    coefficients; Tikhonov regularisation runs down the alpha ladder on the
    column-normalised problem and the area is -I_T at the smallest alpha.
    With ``extrapolate`` the deficit left by the finite time resolution is
    removed by a linear fit in 1/n_time over a ladder of coarser bases.
    """
    P = time_resolution(bsp, spec)
    S, basis, coeffs, ladder = _minimise(bsp, spec, P)
    area = ladder[-1][1]
    if spec.extrapolate and spec.n_time is None:
        Ps = sorted({max(1, int(round(P * f))) for f in (1.0, 0.85, 0.7, 0.55, 0.4)})
        if len(Ps) > 1:
            vals = [ladder[-1][1] if q == P else _minimise(bsp, spec, q)[3][-1][1] for q in Ps]
            area = float(np.polyfit(1.0 / np.array(Ps), vals, 1)[1])
    return InfluenceResult(spec.T, float(area), float(spec.alphas[-1]), len(ladder), ladder,
                           coeffs, S, basis)


def influence_functional(bsp: BSP, f: Source, T: float) -> float:
    """I_T(f) = ||u^f(T)||^2 - 2 Re (u^f(T), 1)."""
    a = wave_solve(bsp, f, T)
    return float(np.sum(np.abs(a) ** 2) - 2 * np.real(blago_mass(bsp, f, T)))


# ---------------------------------------------------------------------------
# Green's function excision

@dataclass(frozen=True)
class ExcisionResult:
    """Kernel of (H_O - z)^{-1} on the obstacle boundary, in original node ids."""

    z: complex
    nodes: np.ndarray
    kernel: np.ndarray
    cond: float
    residual: float

    def symmetry_defect(self) -> float:
        K = self.kernel
        return float(np.abs(K - K.T).max() / np.abs(K).max())


def _obstacle(mesh: TriMesh, inside: Callable[[np.ndarray], np.ndarray]):
    cen = mesh.points[mesh.tris].mean(1)
    drop = np.asarray(inside(cen), dtype=bool)
    t_in, t_out = mesh.tris[drop], mesh.tris[~drop]
    in_nodes = np.unique(t_in)
    out_nodes = np.unique(t_out)
    ring = np.intersect1d(in_nodes, out_nodes)
    core = np.setdiff1d(in_nodes, ring)
    return drop, ring, core


def _submesh_operator(mesh: TriMesh, keep: np.ndarray, z: complex, shift: float) -> sp.csr_matrix:
    sub = TriMesh(mesh.points, mesh.tris[keep], mesh.lengths[keep])
    m = sub.lumped_mass()
    return (sub.stiffness() + sp.diags((shift - z) * m)).tocsr()


def excise_greens(mesh: TriMesh, inside: Callable[[np.ndarray], np.ndarray], z: complex,
                  shift: float = SHIFT, rcond: float = 1e-12) -> ExcisionResult:
    """Green kernel of the surface with the obstacle O removed, from the kernel with O present.

    The correction G(., Y') F(Y', Y) is generated by sources on the closed
    obstacle (its boundary ring and interior nodes).  F is fixed by the
    discrete Neumann condition on the ring: the flux of the corrected kernel
    into the O triangles must balance the source placed on the ring.  The
    system is underdetermined and is solved in the minimum-norm sense; only
    columns of the full kernel at obstacle nodes are used.
    """
    drop, ring, core = _obstacle(mesh, inside)
    cols = np.concatenate([ring, core])
    nr = len(ring)
    lu = spla.splu(_operator(mesh, z, shift))
    E = np.zeros((mesh.n_nodes, len(cols)), dtype=complex if np.imag(z) else float)
    E[cols, np.arange(len(cols))] = 1.0
    G = lu.solve(E)                                   # columns at ring then core nodes
    A_in = _submesh_operator(mesh, drop, z, shift)
    AG = A_in[ring] @ G                               # flux into O, rows on the ring
    mat = -AG.copy()
    mat[:, :nr] += np.eye(nr)
    rhs = AG[:, :nr]
    F, _, rank, sv = np.linalg.lstsq(mat, rhs, rcond=rcond)
    cond = float(sv[0] / sv[rank - 1]) if rank else float("inf")
    residual = float(np.linalg.norm(mat @ F - rhs) / max(np.linalg.norm(rhs), 1e-300))
    K = G[ring][:, :nr] + G[ring] @ F
    return ExcisionResult(z, ring, K, cond, residual)


def greens_with_hole(mesh: TriMesh, inside: Callable[[np.ndarray], np.ndarray], z: complex,
                     shift: float = SHIFT) -> ExcisionResult:
    """The same kernel from a direct solve on the mesh with O removed."""
    drop, ring, _ = _obstacle(mesh, inside)
    A = _submesh_operator(mesh, ~drop, z, shift).tolil()
    # nodes only used by O triangles carry an identity row
    used = np.zeros(mesh.n_nodes, dtype=bool)
    used[np.unique(mesh.tris[~drop])] = True
    for v in np.nonzero(~used)[0]:
        A[v, v] = 1.0
    lu = spla.splu(A.tocsc())
    E = np.zeros((mesh.n_nodes, len(ring)), dtype=complex if np.imag(z) else float)
    E[ring, np.arange(len(ring))] = 1.0
    U = lu.solve(E)
    return ExcisionResult(z, ring, U[ring], 1.0, 0.0)


# ---------------------------------------------------------------------------
# Phi-relatedness

def phi_related_check(bsp1: BSP, bsp2: BSP, phi: np.ndarray, n_test: int = 8, seed: int = 0) -> float:
    """Mismatch of two boundary spectral projections under the node map ``phi``.

    ``phi[i]`` is the Gamma index in ``bsp2`` of Gamma node i of ``bsp1``.
    The defect is the largest of the relative eigenvalue mismatch and, per
    eigenvalue group, the relative mismatch of the projection kernels applied
    to random test densities.  Different multiplicity patterns give inf.
    """
    phi = np.asarray(phi, dtype=int)
    if bsp1.multiplicities != bsp2.multiplicities or bsp1.n_gamma != bsp2.n_gamma:
        return float("inf")
    if np.abs(bsp1.weights - bsp2.weights[phi]).max() > 1e-8 * bsp1.weights.max():
        raise ValueError("the boundary map does not preserve the length element")
    lam1, lam2 = bsp1.group_values, bsp2.group_values
    defect = float(np.max(np.abs(lam1 - lam2) / np.maximum(np.abs(lam1), 1.0)))
    H = np.random.default_rng(seed).standard_normal((bsp1.n_gamma, n_test))
    W = bsp1.weights[:, None]
    pairs = []
    for g in range(len(bsp1.groups)):
        P1 = bsp1.kernel(g)
        P2 = bsp2.kernel(g)[np.ix_(phi, phi)]
        a, b = P1 @ (W * H), P2 @ (W * H)
        pairs.append((np.linalg.norm(a), np.linalg.norm(a - b)))
    # groups whose trace is negligible on Gamma are measured against the largest one
    floor = 1e-3 * max(p[0] for p in pairs)
    for na, nd in pairs:
        defect = max(defect, float(nd / max(na, floor)))
    return defect


# ---------------------------------------------------------------------------
# conical points

@dataclass(frozen=True)
class Detection:
    node: int
    point: tuple
    Y: float            # boundary arclength of the foot point
    t: float            # distance from the boundary
    L: float
    C_hat: float
    n_hat: Optional[int]


@dataclass(frozen=True)
class DetectionReport:
    detections: tuple
    records: tuple      # Detection for every evaluated candidate
    threshold: float
    mode: str


def ball_areas_truth(mesh: TriMesh, node: int, radii: Sequence[float]) -> list[tuple[float, float]]:
    d = mesh_distance(mesh, [node])
    return [(float(r), sublevel_area(mesh, d, r)) for r in radii]


def ball_areas_blind(mesh: TriMesh, node: int, radii: Sequence[float], eps: float,
                     n_eigs: int = 150, n_space: int = 3) -> list[tuple[float, float]]:
    """Ball areas from boundary data on a small obstacle O = B(node, eps).

    S(B(p, r)) = S(O) + S(Omega(dO, r - eps)); the second term comes from
    ``influence_area`` with the boundary spectral projection on dO.
    """
    d = mesh_distance(mesh, [node])
    dv = d
    holed, used = excise(mesh, lambda c: _centroid_dist(mesh, dv, c) < eps)
    hole_area = mesh.total_area - holed.total_area
    bsp = eig_bsp(holed, "hole", n_eigs, keep_interior=False)
    ring = used[holed.boundary_nodes("hole")]
    eps_eff = float(np.mean(d[ring]))
    out = []
    for r in radii:
        if r <= eps_eff:
            raise ValueError("ladder radius inside the obstacle")
        res = influence_area(bsp, InfluenceSpec(r - eps_eff, n_space=n_space, closed=True, extrapolate=True))
        out.append((float(r), hole_area + res.area))
    return out


def _centroid_dist(mesh: TriMesh, d: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # distances were computed at nodes; the triangle value is their mean
    return d[mesh.tris].mean(1)


def detect_singularities(mesh: TriMesh, gamma, radii: Sequence[float], mode: str = "truth",
                         candidates: Optional[Sequence[int]] = None, stride: int = 1,
                         min_dev: float = 0.1, eps: Optional[float] = None,
                         n_eigs: int = 150, refine: bool = True) -> DetectionReport:
    """Cone points among interior points, located by boundary-normal coordinates.

    ``truth`` measures ball areas with mesh geodesic distances; ``blind``
    builds them from boundary spectral data on a small excised ball.  A
    candidate is reported when |L - 1| exceeds both ``min_dev`` and three
    robust standard deviations of L over all candidates; a detection is then
    moved to the best mesh neighbour until L stops decreasing.
    """
    if mode not in ("truth", "blind"):
        raise ValueError("mode must be 'truth' or 'blind'")
    radii = sorted(float(r) for r in radii)
    if len(radii) < 3:
        raise ValueError("at least three radii are needed")
    if radii[0] < 2 * mesh.h:
        raise ValueError("ladder radii below mesh resolution")
    gnodes = mesh.boundary_nodes(gamma)
    _, s_arc = mesh.boundary_arclength(gamma)
    d_gamma = mesh_distance(mesh, gnodes)
    if candidates is None:
        candidates = np.nonzero(d_gamma > radii[-1])[0][::stride]
    if eps is None:
        eps = 0.5 * radii[0]
    snap = 0.05 if mode == "truth" else 0.5

    adj: list[set] = [set() for _ in range(mesh.n_nodes)]
    for a, b, c in mesh.tris:
        adj[a] |= {b, c}
        adj[b] |= {a, c}
        adj[c] |= {a, b}

    cache: dict[int, Detection] = {}

    def evaluate(v: int) -> Detection:
        if v in cache:
            return cache[v]
        if mode == "truth":
            areas = ball_areas_truth(mesh, v, radii)
        else:
            areas = ball_areas_blind(mesh, v, radii, eps, n_eigs)
        L, C_hat, n_hat = charts.cone_constant_estimate(areas, snap=snap, degree=0 if mode == "blind" else 2)
        dv = mesh_distance(mesh, [v])
        foot = int(np.argmin(dv[gnodes]))
        det = Detection(int(v), tuple(map(float, mesh.points[v])), float(s_arc[foot]),
                        float(d_gamma[v]), L, C_hat, n_hat)
        cache[v] = det
        return det

    recs = [evaluate(int(v)) for v in candidates]
    Ls = np.array([r.L for r in recs])
    sigma = 1.4826 * float(np.median(np.abs(Ls - np.median(Ls)))) if len(Ls) else 0.0
    thr = max(min_dev, 3 * sigma)
    hits = sorted((r for r in recs if abs(r.L - 1) > thr), key=lambda r: r.L)
    found: list[Detection] = []
    near: list[np.ndarray] = []
    for r in hits:
        if any(dn[r.node] < radii[-1] for dn in near):
            continue
        if refine:
            cur = r
            while True:
                nb = [evaluate(int(u)) for u in adj[cur.node] if d_gamma[u] > radii[-1]]
                best = min(nb, key=lambda q: q.L, default=cur)
                if best.L >= cur.L:
                    break
                cur = best
            r = cur
        if any(dn[r.node] < radii[-1] for dn in near):
            continue
        near.append(mesh_distance(mesh, [r.node]))
        found.append(r)
    return DetectionReport(tuple(found), tuple(cache[v] for v in sorted(cache)), thr, mode)
