"""Triangle meshes carrying a Riemannian metric through their edge lengths.

Every edge gets its length by Gauss quadrature of the metric along the
straight chart segment; the P1 stiffness (cotangent form) and the lumped mass
are then functions of the edge lengths alone, so meshes related by an
isometry assemble identical operators.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "TriMesh",
    "from_metric",
    "rectangle",
    "warped_patch",
    "polar_disk",
    "cone_metric",
    "cone_mesh",
    "excise",
    "remap",
    "mesh_distance",
    "sublevel_area",
]

MetricFn = Callable[[np.ndarray], np.ndarray]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class TriMesh:
    points: np.ndarray            # (N, 2) chart coordinates
    tris: np.ndarray              # (M, 3)
    lengths: np.ndarray           # (M, 3), lengths[:, i] is the edge opposite vertex i
    boundary: dict = field(default_factory=dict)   # tag -> (E, 2) ordered edges
    edge_len: dict = field(default_factory=dict)   # tag -> (E,) boundary edge lengths
    metric: Optional[MetricFn] = field(default=None, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.points)

    @property
    def areas(self) -> np.ndarray:
        a, b, c = np.sort(self.lengths, axis=1)[:, ::-1].T
        # Kahan's stable Heron formula, a >= b >= c
        q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
        return 0.25 * np.sqrt(np.maximum(q, 0.0))

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def h(self) -> float:
        """Mean edge length."""
        return float(self.lengths.mean())

    @property
    def h_max(self) -> float:
        return float(self.lengths.max())

    def stiffness(self) -> sp.csr_matrix:
        L2 = self.lengths ** 2
        A = self.areas
        # cot of the angle at vertex i
        cot = np.stack([(L2[:, 1] + L2[:, 2] - L2[:, 0]),
                        (L2[:, 2] + L2[:, 0] - L2[:, 1]),
                        (L2[:, 0] + L2[:, 1] - L2[:, 2])], 1) / (4 * A[:, None])
        T = self.tris
        rows, cols, vals = [], [], []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            w = 0.5 * cot[:, i]   # edge (j, k) sits opposite vertex i
            rows += [T[:, j], T[:, k], T[:, j], T[:, k]]
            cols += [T[:, k], T[:, j], T[:, j], T[:, k]]
            vals += [-w, -w, w, w]
        N = self.n_nodes
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N, N))

    def lumped_mass(self) -> np.ndarray:
        m = np.zeros(self.n_nodes)
        np.add.at(m, self.tris.ravel(), np.repeat(self.areas / 3, 3))
        return m

    def boundary_nodes(self, tags) -> np.ndarray:
        """Nodes of the given boundary pieces, in edge order, without repeats."""
        tags = [tags] if isinstance(tags, str) else list(tags)
        seen, out = set(), []
        for tag in tags:
            for a, b in self.boundary[tag]:
                for v in (a, b):
                    if v not in seen:
                        seen.add(v)
                        out.append(int(v))
        return np.array(out, dtype=int)

    def boundary_weights(self, tags) -> tuple[np.ndarray, np.ndarray]:
        """(nodes, lumped length weights) so that int_G f dl ~ sum w f."""
        tags = [tags] if isinstance(tags, str) else list(tags)
        nodes = self.boundary_nodes(tags)
        pos = {v: i for i, v in enumerate(nodes)}
        w = np.zeros(len(nodes))
        for tag in tags:
            for (a, b), l in zip(self.boundary[tag], self.edge_len[tag]):
                w[pos[a]] += l / 2
                w[pos[b]] += l / 2
        return nodes, w

    def boundary_arclength(self, tags) -> tuple[np.ndarray, np.ndarray]:
        """(nodes, arclength) along the chained boundary pieces."""
        tags = [tags] if isinstance(tags, str) else list(tags)
        nodes = self.boundary_nodes(tags)
        pos = {v: i for i, v in enumerate(nodes)}
        s = np.zeros(len(nodes))
        for tag in tags:
            for (a, b), l in zip(self.boundary[tag], self.edge_len[tag]):
                if s[pos[b]] == 0 and pos[b] > pos[a]:
                    s[pos[b]] = s[pos[a]] + l
        return nodes, s


def _seg_lengths(p: np.ndarray, q: np.ndarray, metric: Optional[MetricFn]) -> np.ndarray:
    d = q - p
    if metric is None:
        return np.linalg.norm(d, axis=1)
    out = np.zeros(len(p))
    for x, w in zip(_GL_X, _GL_W):
        G = metric(p + x * d)
        out += w * np.sqrt(np.einsum("ei,eij,ej->e", d, G, d))
    return out


def _chain(edges: np.ndarray) -> np.ndarray:
    """Order a set of boundary edges into a path (or loop)."""
    edges = [tuple(map(int, e)) for e in edges]
    if not edges:
        return np.zeros((0, 2), dtype=int)
    nxt = {}
    indeg = {}
    for a, b in edges:
        nxt.setdefault(a, []).append(b)
        indeg[b] = indeg.get(b, 0) + 1
    starts = [a for a in nxt if indeg.get(a, 0) == 0]
    cur = starts[0] if starts else edges[0][0]
    out = []
    used = set()
    while len(out) < len(edges):
        cand = [b for b in nxt.get(cur, []) if (cur, b) not in used]
        if not cand:
            rest = [e for e in edges if e not in used]
            cur = rest[0][0]
            continue
        b = cand[0]
        used.add((cur, b))
        out.append((cur, b))
        cur = b
    return np.array(out, dtype=int)


def from_metric(points: np.ndarray, tris: np.ndarray, metric: Optional[MetricFn],
                boundary: dict) -> TriMesh:
    """Build a mesh whose edge lengths come from the metric along chart segments.

    ``boundary`` maps tags to arrays of directed edges (node pairs).
    """
    points = np.asarray(points, dtype=float)
    tris = np.asarray(tris, dtype=int)
    # orient counter-clockwise in the chart
    p = points[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
            (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tris = np.where((cross < 0)[:, None], tris[:, [0, 2, 1]], tris)
    L = np.zeros(tris.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        L[:, i] = _seg_lengths(points[tris[:, j]], points[tris[:, k]], metric)
    bnd = {}
    blen = {}
    for tag, edges in boundary.items():
        e = _chain(np.asarray(edges, dtype=int))
        bnd[tag] = e
        blen[tag] = _seg_lengths(points[e[:, 0]], points[e[:, 1]], metric) if len(e) else np.zeros(0)
    return TriMesh(points, tris, L, bnd, blen, metric)


def _grid_tris(nx: int, ny: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = j * (nx + 1) + i
    b = a + 1
    c = a + nx + 1
    d = c + 1
    # alternate the diagonal to avoid a preferred direction
    flip = (i + j) % 2 == 0
    t1 = np.where(flip[:, None], np.stack([a, b, d], 1), np.stack([a, b, c], 1))
    t2 = np.where(flip[:, None], np.stack([a, d, c], 1), np.stack([b, d, c], 1))
    return np.concatenate([t1, t2])


def rectangle(Lx: float, Ly: float, nx: int, ny: int, metric: Optional[MetricFn] = None) -> TriMesh:
    """[0, Lx] x [0, Ly] with boundary pieces bottom, right, top, left."""
    x = np.linspace(0, Lx, nx + 1)
    y = np.linspace(0, Ly, ny + 1)
    X, Y = np.meshgrid(x, y)
    pts = np.stack([X.ravel(), Y.ravel()], 1)
    idx = lambda i, j: j * (nx + 1) + i
    bnd = {
        "bottom": [(idx(i, 0), idx(i + 1, 0)) for i in range(nx)],
        "right": [(idx(nx, j), idx(nx, j + 1)) for j in range(ny)],
        "top": [(idx(i + 1, ny), idx(i, ny)) for i in range(nx - 1, -1, -1)],
        "left": [(idx(0, j + 1), idx(0, j)) for j in range(ny - 1, -1, -1)],
    }
    return from_metric(pts, _grid_tris(nx, ny), metric, bnd)


def warped_patch(Lx: float, Ly: float, nx: int, ny: int, w: Callable[[np.ndarray], np.ndarray]) -> TriMesh:
    """Chart (x, s) with metric w(s)^2 dx^2 + ds^2; the bottom s = 0 is a geodesic-parallel base."""
    def metric(p):
        G = np.zeros((len(p), 2, 2))
        G[:, 0, 0] = w(p[:, 1]) ** 2
        G[:, 1, 1] = 1.0
        return G
    return rectangle(Lx, Ly, nx, ny, metric)


def cone_metric(C: float, h: Optional[Callable] = None, center=(0.0, 0.0)) -> MetricFn:
    """Cartesian pullback of dr^2 + C r^2 (1 + h(r, theta)) dtheta^2."""
    cx, cy = center

    def metric(p):
        x, y = p[:, 0] - cx, p[:, 1] - cy
        r = np.hypot(x, y)
        r = np.where(r == 0, 1e-300, r)
        th = np.arctan2(y, x)
        q = C * (1 + (h(r, th) if h is not None else np.zeros_like(r)))
        er = np.stack([x / r, y / r], 1)
        et = np.stack([-y / r, x / r], 1)
        return er[:, :, None] * er[:, None, :] + q[:, None, None] * et[:, :, None] * et[:, None, :]
    return metric


def polar_disk(R: float, nr: int, ntheta: int, metric: Optional[MetricFn] = None,
               grading: float = 1.0, center=(0.0, 0.0)) -> TriMesh:
    """Disk of chart radius R: apex node 0 plus nr rings of ntheta nodes.

    Rings sit at R (i/nr)^grading; the boundary piece is ``outer``.
    """
    radii = R * (np.arange(1, nr + 1) / nr) ** grading
    th = 2 * math.pi * np.arange(ntheta) / ntheta
    pts = [np.zeros(2)]
    for i, r in enumerate(radii):
        off = 0.5 * (i % 2) * (2 * math.pi / ntheta)
        pts += list(np.stack([r * np.cos(th + off), r * np.sin(th + off)], 1))
    pts = np.array(pts) + np.asarray(center, dtype=float)[None, :]
    node = lambda i, j: 1 + i * ntheta + (j % ntheta)
    tris = [(0, node(0, j), node(0, j + 1)) for j in range(ntheta)]
    for i in range(nr - 1):
        for j in range(ntheta):
            if i % 2 == 0:
                # ring i+1 is shifted forward by half a cell
                tris.append((node(i, j), node(i + 1, j), node(i, j + 1)))
                tris.append((node(i, j + 1), node(i + 1, j), node(i + 1, j + 1)))
            else:
                tris.append((node(i, j), node(i + 1, j + 1), node(i, j + 1)))
                tris.append((node(i, j), node(i + 1, j), node(i + 1, j + 1)))
    bnd = {"outer": [(node(nr - 1, j), node(nr - 1, j + 1)) for j in range(ntheta)]}
    return from_metric(pts, np.array(tris), metric, bnd)


def cone_mesh(point, R: float, nr: int, ntheta: int, grading: float = 1.0) -> TriMesh:
    """Polar mesh of the chart disk of radius R around a cone point.

    ``point`` is a ``charts.ConicalPoint``; the chart radius is the distance
    from the apex, so the outer ring is a geodesic circle.
    """
    if R > point.epsilon:
        raise ValueError("mesh radius exceeds the cone chart")
    metric = cone_metric(point.C, point.h, point.center)
    return polar_disk(R, nr, ntheta, metric, grading, point.center)


def excise(mesh: TriMesh, inside: Callable[[np.ndarray], np.ndarray], tag: str = "hole") -> tuple[TriMesh, np.ndarray]:
    """Remove triangles whose centroid satisfies ``inside``; returns (mesh, old node ids).

    The new boundary of the removed region is tagged ``tag``; other tags keep
    the edges that survive.
    """
    cen = mesh.points[mesh.tris].mean(1)
    drop = np.asarray(inside(cen), dtype=bool)
    keep_t = mesh.tris[~drop]
    used = np.unique(keep_t)
    new_id = -np.ones(mesh.n_nodes, dtype=int)
    new_id[used] = np.arange(len(used))
    # directed edges of kept triangles; a hole edge is a kept edge whose twin lies in a dropped triangle
    def dedges(T):
        return {(int(T[i, a]), int(T[i, b])) for i in range(len(T)) for a, b in ((0, 1), (1, 2), (2, 0))}
    kept = dedges(keep_t)
    dropped = dedges(mesh.tris[drop])
    hole = [(b, a) for (a, b) in dropped if (b, a) in kept]
    hole = [(a, b) for (b, a) in hole]  # orientation of the kept triangle
    hole = [(new_id[a], new_id[b]) for a, b in hole]
    bnd = {}
    for t, edges in mesh.boundary.items():
        e = [(new_id[a], new_id[b]) for a, b in edges if new_id[a] >= 0 and new_id[b] >= 0
             and ((a, b) in kept or (b, a) in kept)]
        bnd[t] = e
    bnd[tag] = hole
    new = from_metric(mesh.points[used], new_id[keep_t], mesh.metric, bnd)
    return new, used


def remap(mesh: TriMesh, transform: Callable[[np.ndarray], np.ndarray], perm: Optional[np.ndarray] = None,
          metric: Optional[MetricFn] = None) -> tuple[TriMesh, np.ndarray]:
    """Copy of the mesh with moved chart points and renumbered nodes.

    ``perm[i]`` is the new index of old node i.  With ``metric`` None the old
    edge lengths are kept (an exact isometric copy); otherwise they are
    recomputed from the new metric.  Returns (mesh, perm).
    """
    N = mesh.n_nodes
    perm = np.arange(N) if perm is None else np.asarray(perm)
    inv = np.empty(N, dtype=int)
    inv[perm] = np.arange(N)
    pts = transform(mesh.points)[inv]
    tris = perm[mesh.tris]
    bnd = {t: perm[e] for t, e in mesh.boundary.items()}
    if metric is None:
        return TriMesh(pts, tris, mesh.lengths.copy(), bnd, dict(mesh.edge_len), None), perm
    return from_metric(pts, tris, metric, bnd), perm


# ---------------------------------------------------------------------------
# distances and areas

def _local_frame(la: float, lb: float, lab: float):
    """Place a = (0, 0), b = (lab, 0) and c above the axis from |ac| = la, |bc| = lb."""
    cx = (la * la - lb * lb + lab * lab) / (2 * lab)
    cy = math.sqrt(max(la * la - cx * cx, 0.0))
    return cx, cy


def _update(da: float, db: float, lab: float, lac: float, lbc: float, point: bool = True) -> float:
    """Distance at c from distances at a and b across one flat triangle.

    ``point`` adds the unfolded point-source candidate, which is exact for a
    front emitted by a single node but too small for converging fronts.
    """
    best = min(da + lac, db + lbc)
    cx, cy = _local_frame(lac, lbc, lab)
    if cy <= 0:
        return best
    # point source unfolded below the edge ab
    if point and abs(da - db) <= lab <= da + db and da > 0 and db > 0:
        sx = (da * da - db * db + lab * lab) / (2 * lab)
        sy = -math.sqrt(max(da * da - sx * sx, 0.0))
        # the straight ray s -> c must cross ab between a and b
        tcross = sx + (cx - sx) * (0 - sy) / (cy - sy)
        if 0 <= tcross <= lab:
            best = min(best, math.hypot(cx - sx, cy - sy))
    # plane front through a and b
    if abs(db - da) < lab:
        gx = (db - da) / lab
        gy = math.sqrt(1 - gx * gx)
        d = da + gx * cx + gy * cy
        # characteristic direction must enter through ab
        if gy > 0:
            foot = cx - gx * (cy / gy)
            if 0 <= foot <= lab:
                best = min(best, d)
    return best


def mesh_distance(mesh: TriMesh, sources, init: Optional[np.ndarray] = None,
                  front: Optional[str] = None) -> np.ndarray:
    """Geodesic distance to the source nodes by fast marching with triangle unfolding.

    ``front`` is ``point`` (unfolded point sources, for a single source node)
    or ``plane`` (linear fronts, for boundary curves); by default it follows
    the number of sources.
    """
    N = mesh.n_nodes
    d = np.full(N, np.inf)
    src = np.atleast_1d(np.asarray(sources, dtype=int))
    if front is None:
        front = "point" if len(src) == 1 else "plane"
    if front not in ("point", "plane"):
        raise ValueError("front must be 'point' or 'plane'")
    point = front == "point"
    d[src] = 0.0 if init is None else np.asarray(init, dtype=float)
    node_tris: list[list[int]] = [[] for _ in range(N)]
    for t, tri in enumerate(mesh.tris):
        for v in tri:
            node_tris[v].append(t)
    done = np.zeros(N, dtype=bool)
    heap = [(d[v], int(v)) for v in src]
    heapq.heapify(heap)
    T, L = mesh.tris, mesh.lengths
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v] or dv > d[v]:
            continue
        done[v] = True
        for t in node_tris[v]:
            tri = T[t]
            i = int(np.nonzero(tri == v)[0][0])
            for j in ((i + 1) % 3, (i + 2) % 3):
                c = tri[j]
                if done[c]:
                    continue
                o = 3 - i - j
                other = tri[o]
                lvc = L[t, o]          # edge v-c is opposite vertex o
                cand = d[v] + lvc
                if done[other]:
                    lvo = L[t, j]
                    loc = L[t, i]
                    cand = min(cand, _update(d[v], d[other], lvo, lvc, loc, point))
                if cand < d[c]:
                    d[c] = cand
                    heapq.heappush(heap, (cand, int(c)))
    return d


def sublevel_area(mesh: TriMesh, d: np.ndarray, r: float) -> float:
    """Area of {d < r} with d linear on each triangle."""
    A = mesh.areas
    D = d[mesh.tris]
    below = D < r
    nb = below.sum(1)
    total = float(A[nb == 3].sum())
    # one vertex below: a corner triangle; two below: the complement of one
    for cnt in (1, 2):
        idx = np.nonzero(nb == cnt)[0]
        if not len(idx):
            continue
        Dt = D[idx]
        sel = below[idx] if cnt == 1 else ~below[idx]
        k = np.argmax(sel, axis=1)
        dk = Dt[np.arange(len(idx)), k]
        others = np.stack([Dt[np.arange(len(idx)), (k + 1) % 3], Dt[np.arange(len(idx)), (k + 2) % 3]], 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.clip((r - dk[:, None]) / (others - dk[:, None]), 0, 1)
        corner = frac[:, 0] * frac[:, 1] * A[idx]
        total += float(corner.sum()) if cnt == 1 else float((A[idx] - corner).sum())
    return total


def from_p0(points: np.ndarray, tris: np.ndarray, metrics: np.ndarray) -> TriMesh:
    """Mesh with a given constant metric per triangle; the whole boundary is tagged ``outer``.

    Each triangle measures its own edges with its own tensor.
    """
    points = np.asarray(points, dtype=float)
    tris = np.asarray(tris, dtype=int)
    metrics = np.asarray(metrics, dtype=float)
    if metrics.shape != (len(tris), 2, 2):
        raise ValueError("need one 2x2 metric per triangle")
    if np.any(np.linalg.eigvalsh(metrics) <= 0):
        raise ValueError("triangle metrics must be positive definite")
    p = points[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
            (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    if np.any(cross == 0):
        raise ValueError("degenerate triangle in the chart")
    tris = np.where((cross < 0)[:, None], tris[:, [0, 2, 1]], tris)
    L = np.zeros(tris.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        d = points[tris[:, k]] - points[tris[:, j]]
        L[:, i] = np.sqrt(np.einsum("ei,eij,ej->e", d, metrics, d))
    directed = {}
    for t, tri in enumerate(tris):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            directed[(int(tri[a]), int(tri[b]))] = (t, 3 - a - b)
    edges, lens = [], {}
    for (a, b), (t, opp) in directed.items():
        if (b, a) not in directed:
            edges.append((a, b))
            lens[(a, b)] = L[t, opp]
    chained = _chain(np.array(edges, dtype=int))
    blen = np.array([lens[(int(a), int(b))] for a, b in chained])
    return TriMesh(points, tris, L, {"outer": chained}, {"outer": blen}, None)


@dataclass(frozen=True)
class MeshInterior:
    """Interior of a surface given as a mesh or a mesh recipe.

    ``kind`` is ``mesh`` (explicit P0 data), ``disk`` (polar mesh around the
    single cone point, or a smooth disk), ``strip`` (flat rectangle) or
    ``patch`` (metric (1 + bend s^2)^2 dx^2 + ds^2 on a rectangle).
    """

    kind: str
    params: dict = field(default_factory=dict)
    cone: object = None
    vertices: Optional[np.ndarray] = None
    triangles: Optional[np.ndarray] = None
    metrics: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("mesh", "disk", "strip", "patch"):
            raise ValueError(f"unknown interior mesh kind {self.kind!r}")
        if self.kind == "mesh" and (self.vertices is None or self.triangles is None or self.metrics is None):
            raise ValueError("explicit meshes need vertices, triangles and metric")

    @property
    def gamma(self) -> tuple[str, ...]:
        return ("outer",) if self.kind in ("mesh", "disk") else ("bottom",)

    def _p(self, key, default):
        return self.params.get(key, default)

    def metric_fn(self) -> Optional[MetricFn]:
        if self.kind == "disk":
            if self.cone is None:
                return cone_metric(1.0, None)
            return cone_metric(self.cone.C, self.cone.h, self.cone.center)
        if self.kind == "patch":
            bend = self._p("bend", 0.0)

            def metric(p):
                G = np.zeros((len(p), 2, 2))
                G[:, 0, 0] = (1 + bend * p[:, 1] ** 2) ** 2
                G[:, 1, 1] = 1.0
                return G
            return metric
        return None

    def metric_at_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(1, 2)
        if self.kind == "mesh":
            pts = self.vertices[self.triangles]
            # barycentric containment test in the chart
            v0, v1, v2 = pts[:, 0], pts[:, 1], pts[:, 2]
            d = (v1[:, 1] - v2[:, 1]) * (v0[:, 0] - v2[:, 0]) + (v2[:, 0] - v1[:, 0]) * (v0[:, 1] - v2[:, 1])
            l1 = ((v1[:, 1] - v2[:, 1]) * (x[0, 0] - v2[:, 0]) + (v2[:, 0] - v1[:, 0]) * (x[0, 1] - v2[:, 1])) / d
            l2 = ((v2[:, 1] - v0[:, 1]) * (x[0, 0] - v2[:, 0]) + (v0[:, 0] - v2[:, 0]) * (x[0, 1] - v2[:, 1])) / d
            inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (1 - l1 - l2 >= -1e-12)
            if not inside.any():
                raise ValueError("point outside the mesh")
            return self.metrics[int(np.argmax(inside))]
        fn = self.metric_fn()
        return np.eye(2) if fn is None else fn(x)[0]

    def build(self) -> TriMesh:
        if self.kind == "mesh":
            return from_p0(self.vertices, self.triangles, self.metrics)
        if self.kind == "disk":
            R = self._p("R", 1.0)
            center = self.cone.center if self.cone is not None else (0.0, 0.0)
            if self.cone is not None and R > self.cone.epsilon:
                raise ValueError("disk radius exceeds the cone chart")
            return polar_disk(R, int(self._p("rings", 40)), int(self._p("sectors", 64)),
                              self.metric_fn(), self._p("grading", 1.0), center)
        Lx, Ly = self._p("Lx", 1.0), self._p("Ly", 1.0)
        return rectangle(Lx, Ly, int(self._p("nx", 40)), int(self._p("ny", 40)), self.metric_fn())
