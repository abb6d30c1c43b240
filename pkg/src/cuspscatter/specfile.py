"""Reader for surface description files.

The format is sectioned text::

    [surface]
    name = demo

    [end.1]
    kind = cusp
    radius = 1.0

    [interior]
    type = warped
    amplitude = 0.4

    [cone.a]
    n = 3
    h = r2
    h_amp = 0.5

``key = value`` pairs; a key with an empty value takes the indented rows
that follow as a numeric array.  ``#`` starts a comment.  Unknown sections
or keys are errors carrying the line number.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .charts import (ConicalPoint, EndPerturbation, EndSpec, HFunction, SpecError,
                     SurfaceSpec, WarpedProfile)
from .mesh import MeshInterior

__all__ = ["load_surface", "parse_surface", "spec_hash"]

_KEYS = {
    "surface": {"name", "description"},
    "end": {"kind", "radius", "eps0", "x", "y", "a1", "a2", "a3"},
    "cone": {"C", "n", "h", "h_amp", "epsilon", "center", "orbifold", "log_r", "theta", "values"},
    "interior": {"type", "form", "radius", "amplitude", "center", "width", "n", "t", "f",
                 "angular_amplitude", "angular_mode", "vertices", "triangles", "metric",
                 "R", "rings", "sectors", "grading", "Lx", "Ly", "nx", "ny", "bend"},
}

_SECTION = re.compile(r"^\[([A-Za-z_]+)(?:\.([A-Za-z0-9_]+))?\]\s*$")


@dataclass
class _Value:
    text: str
    line: int
    rows: list

    def scalar(self) -> float:
        try:
            return float(self.text)
        except ValueError:
            raise SpecError(f"expected a number, got {self.text!r}", self.line) from None

    def integer(self) -> int:
        v = self.scalar()
        if v != int(v):
            raise SpecError(f"expected an integer, got {self.text!r}", self.line)
        return int(v)

    def vector(self) -> np.ndarray:
        src = self.text.split() if self.text else [x for r, _ in self.rows for x in r.split()]
        try:
            return np.array([float(x) for x in src])
        except ValueError:
            raise SpecError("non-numeric entry in array", self.line) from None

    def matrix(self) -> np.ndarray:
        if not self.rows:
            raise SpecError("expected indented array rows", self.line)
        out = []
        for r, ln in self.rows:
            try:
                out.append([float(x) for x in r.split()])
            except ValueError:
                raise SpecError("non-numeric entry in array", ln) from None
        if len({len(r) for r in out}) != 1:
            raise SpecError("ragged array rows", self.rows[0][1])
        return np.array(out)

    def boolean(self) -> bool:
        t = self.text.lower()
        if t in ("true", "yes", "1"):
            return True
        if t in ("false", "no", "0"):
            return False
        raise SpecError(f"expected true or false, got {self.text!r}", self.line)


def _tokenize(text: str) -> list[tuple[str, str, int, dict]]:
    sections: list[tuple[str, str, int, dict]] = []
    cur = None
    last = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if raw[:1] in (" ", "\t"):
            if last is None or last.text:
                raise SpecError("indented row outside an array", ln)
            last.rows.append((line.strip(), ln))
            continue
        m = _SECTION.match(line)
        if m:
            kind, label = m.group(1), m.group(2) or ""
            if kind not in _KEYS:
                raise SpecError(f"unknown section [{kind}]", ln)
            if kind in ("end", "cone") and not label:
                raise SpecError(f"section [{kind}] needs a label, e.g. [{kind}.1]", ln)
            if any(s[0] == kind and s[1] == label for s in sections):
                raise SpecError(f"duplicate section [{line.strip()[1:-1]}]", ln)
            cur = (kind, label, ln, {})
            sections.append(cur)
            last = None
            continue
        if "=" not in line:
            raise SpecError("expected 'key = value'", ln)
        if cur is None:
            raise SpecError("key outside any section", ln)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS[cur[0]]:
            raise SpecError(f"unknown key {key!r} in [{cur[0]}]", ln)
        if key in cur[3]:
            raise SpecError(f"duplicate key {key!r}", ln)
        last = _Value(val, ln, [])
        cur[3][key] = last
    return sections


def _cone(label: str, ln: int, kv: dict) -> ConicalPoint:
    if ("C" in kv) == ("n" in kv):
        raise SpecError(f"cone {label}: give exactly one of C or n", ln)
    orbifold = kv["orbifold"].boolean() if "orbifold" in kv else "n" in kv
    if "n" in kv:
        n = kv["n"].integer()
        if n < 1:
            raise SpecError("cone order n must be >= 1", kv["n"].line)
        C = 1.0 / n ** 2
    else:
        C = kv["C"].scalar()
    hk = kv["h"].text if "h" in kv else "zero"
    if hk == "table":
        for k in ("log_r", "theta", "values"):
            if k not in kv:
                raise SpecError(f"tabulated h needs {k}", ln)
        h = HFunction("table", log_r=kv["log_r"].vector(), theta=kv["theta"].vector(),
                      values=kv["values"].matrix())
    else:
        h = HFunction(hk, kv["h_amp"].scalar() if "h_amp" in kv else 0.0)
    center = (0.0, 0.0)
    if "center" in kv:
        c = kv["center"].vector()
        if len(c) != 2:
            raise SpecError("center needs two numbers", kv["center"].line)
        center = (float(c[0]), float(c[1]))
    eps = kv["epsilon"].scalar() if "epsilon" in kv else 0.5
    try:
        return ConicalPoint(label, C, h, eps, center, orbifold and C < 1)
    except SpecError as e:
        raise SpecError(str(e), ln) from None


def _end(label: str, ln: int, kv: dict) -> EndSpec:
    for k in ("kind", "radius"):
        if k not in kv:
            raise SpecError(f"[end.{label}] needs {k}", ln)
    pert = None
    table = [k for k in ("x", "y", "a1", "a2", "a3") if k in kv]
    if table:
        if len(table) != 5:
            raise SpecError("end perturbation needs x, y, a1, a2 and a3", ln)
        pert = EndPerturbation(kv["x"].vector(), kv["y"].vector(), kv["a1"].matrix(),
                               kv["a2"].matrix(), kv["a3"].matrix(),
                               kv["eps0"].scalar() if "eps0" in kv else 0.5)
        pert.decay_check()
    try:
        return EndSpec(kv["kind"].text, kv["radius"].scalar(), pert)
    except SpecError as e:
        raise SpecError(str(e), ln) from None


def _interior(ln: int, kv: dict, cones: list[ConicalPoint]):
    kind = kv["type"].text if "type" in kv else "warped"
    num = {k: v.scalar() for k, v in kv.items()
           if k in ("radius", "amplitude", "center", "width", "angular_amplitude", "R", "grading",
                    "Lx", "Ly", "bend")}
    ints = {k: v.integer() for k, v in kv.items() if k in ("n", "angular_mode", "rings", "sectors", "nx", "ny")}
    if kind == "warped":
        form = kv["form"].text if "form" in kv else "bump"
        if form == "table":
            if "t" not in kv or "f" not in kv:
                raise SpecError("tabulated warped interior needs t and f", ln)
            return WarpedProfile(kv["t"].vector(), kv["f"].vector(),
                                 angular_amplitude=num.get("angular_amplitude", 0.0),
                                 angular_mode=ints.get("angular_mode", 0))
        if form != "bump":
            raise SpecError(f"unknown warped form {form!r}", kv["form"].line)
        return WarpedProfile.bump(num.get("radius", 1.0), num.get("amplitude", 0.0), num.get("center", 0.0),
                                  num.get("width", 1.0), ints.get("n", 401),
                                  num.get("angular_amplitude", 0.0), ints.get("angular_mode", 0))
    if kind not in ("mesh", "disk", "strip", "patch"):
        raise SpecError(f"unknown interior type {kind!r}", kv["type"].line)
    params = {**num, **ints}
    if kind == "disk":
        if len(cones) > 1:
            raise SpecError("a disk interior carries at most one cone point", ln)
        return MeshInterior("disk", params, cones[0] if cones else None)
    if kind == "mesh":
        for k in ("vertices", "triangles", "metric"):
            if k not in kv:
                raise SpecError(f"mesh interior needs {k}", ln)
        V = kv["vertices"].matrix()
        T = kv["triangles"].matrix()
        G = kv["metric"].matrix()
        if V.shape[1] != 2 or T.shape[1] != 3 or G.shape[1] != 3:
            raise SpecError("vertices need 2 columns, triangles 3, metric 3 (g11 g12 g22)", ln)
        if len(G) != len(T):
            raise SpecError("one metric row per triangle", kv["metric"].line)
        if T.min() < 0 or T.max() >= len(V) or np.any(T != np.round(T)):
            raise SpecError("triangle indices out of range", kv["triangles"].line)
        mets = np.stack([np.stack([G[:, 0], G[:, 1]], 1), np.stack([G[:, 1], G[:, 2]], 1)], 1)
        if np.any(np.linalg.eigvalsh(mets) <= 0):
            raise SpecError("triangle metric not positive definite", kv["metric"].line)
        return MeshInterior("mesh", params, None, V, T.astype(int), mets)
    if cones:
        raise SpecError(f"{kind} interiors cannot carry cone points", ln)
    return MeshInterior(kind, params)


def parse_surface(text: str, name: str = "surface") -> SurfaceSpec:
    sections = _tokenize(text)
    meta, ends, cones, interior_sec = {}, [], [], None
    for kind, label, ln, kv in sections:
        if kind == "surface":
            meta = {k: v.text for k, v in kv.items()}
        elif kind == "end":
            ends.append((label, _end(label, ln, kv)))
        elif kind == "cone":
            cones.append(_cone(label, ln, kv))
        else:
            interior_sec = (ln, kv)
    interior = None
    if interior_sec is not None:
        interior = _interior(interior_sec[0], interior_sec[1], cones)
    elif cones:
        interior = MeshInterior("disk", {}, cones[0]) if len(cones) == 1 else None
    kinds = [e.kind for _, e in ends]
    if "cusp" in kinds and "regular" in kinds and kinds.index("regular") < len(kinds) - kinds[::-1].index("cusp") - 1:
        line = next(ln for k, lab, ln, _ in sections if k == "end" and lab == ends[kinds.index("regular")][0])
        raise SpecError("cusp ends must be listed before regular ends", line)
    return SurfaceSpec(meta.get("name", name), tuple(e for _, e in ends), interior, tuple(cones), meta)


def load_surface(path: Union[str, Path]) -> SurfaceSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}") from None
    return parse_surface(text, path.stem)


def spec_hash(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
