from pathlib import Path

import numpy as np
import pytest

from cuspscatter import SpecError, load_surface, parse_surface
from cuspscatter.charts import WarpedProfile
from cuspscatter.mesh import MeshInterior
from cuspscatter.specfile import spec_hash

SPECS = Path(__file__).resolve().parents[1] / "specs"


@pytest.mark.parametrize("path", sorted(SPECS.glob("*.surf")), ids=lambda p: p.stem)
def test_shipped_specs_load(path):
    surf = load_surface(path)
    assert surf.name


def test_warped_spec():
    surf = load_surface(SPECS / "warped.surf")
    assert [e.kind for e in surf.ends] == ["cusp", "regular"]
    assert isinstance(surf.interior, WarpedProfile)
    assert not surf.interior.is_free


def test_cone_without_interior_gives_disk():
    surf = parse_surface("[cone.a]\nn = 4\nh = rcos\nh_amp = 0.1\n")
    assert isinstance(surf.interior, MeshInterior) and surf.interior.kind == "disk"
    assert abs(surf.cone("a").C - 1 / 16) < 1e-15
    assert surf.cone("a").orbifold


def test_unknown_key_reports_line():
    with pytest.raises(SpecError, match="line 3: unknown key 'radiuss'"):
        parse_surface("[end.1]\nkind = cusp\nradiuss = 1\n")


@pytest.mark.parametrize("text,msg", [
    ("[bogus]\n", "unknown section"),
    ("[end]\nkind = cusp\n", "needs a label"),
    ("kind = cusp\n", "outside any section"),
    ("[end.1]\nkind = cusp\nkind = cusp\n", "duplicate key"),
    ("[end.1]\nkind = cusp\nradius = abc\n", "expected a number"),
    ("[cone.a]\nn = 3\nC = 0.1\n", "exactly one of C or n"),
    ("[end.1]\nkind = regular\nradius = 1\n[end.2]\nkind = cusp\nradius = 1\n", "before regular"),
    ("[interior]\ntype = strip\n[cone.a]\nn = 2\n", "cannot carry cone"),
    ("[surface]\n   1 2\n", "outside an array"),
])
def test_errors(text, msg):
    with pytest.raises(SpecError, match=msg):
        parse_surface(text)


def test_explicit_mesh_interior():
    text = """[interior]
type = mesh
vertices =
    0 0
    1 0
    0 1
    1 1
triangles =
    0 1 2
    1 3 2
metric =
    4 0 1
    4 0 1
"""
    surf = parse_surface(text)
    m = surf.interior.build()
    assert abs(m.total_area - 2.0) < 1e-14
    assert np.allclose(surf.interior.metric_at_point([0.2, 0.2]), np.diag([4.0, 1.0]))


def test_mesh_metric_must_be_positive():
    text = "[interior]\ntype = mesh\nvertices =\n  0 0\n  1 0\n  0 1\ntriangles =\n  0 1 2\nmetric =\n  1 2 1\n"
    with pytest.raises(SpecError, match="positive definite"):
        parse_surface(text)


def test_hash_is_stable(tmp_path):
    p = tmp_path / "a.surf"
    p.write_text("[surface]\nname = x\n")
    assert spec_hash(p) == spec_hash(p)
    assert len(spec_hash(p)) == 16
