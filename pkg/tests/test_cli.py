from pathlib import Path

import pytest

from cuspscatter.cli import main

SPECS = Path(__file__).resolve().parents[1] / "specs"


def _body(path):
    return [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]


def test_classify_parabolic(tmp_path):
    out = tmp_path / "c.txt"
    assert main(["classify", "1", "1", "0", "1", "--out", str(out)]) == 0
    text = out.read_text()
    assert "parabolic" in text and "∞" in text


def test_classify_hyperbolic_and_elliptic(capsys):
    assert main(["classify", "2", "0", "0", "0.5"]) == 0
    assert "hyperbolic" in capsys.readouterr().out
    assert main(["classify", "0", "-1", "1", "0"]) == 0
    assert "elliptic" in capsys.readouterr().out


def test_classify_bad_determinant():
    assert main(["classify", "1", "1", "1", "1"]) == 2


def test_bad_spec(tmp_path):
    p = tmp_path / "bad.surf"
    p.write_text("[end.1]\nkind = cusp\nwidth = 2\n")
    assert main(["smatrix", "--spec", str(p), "--no-plot"]) == 2


def test_missing_spec_file(tmp_path):
    assert main(["smatrix", "--spec", str(tmp_path / "none.surf"), "--no-plot"]) == 2


def test_empty_afile(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("")
    out = tmp_path / "g.txt"
    rc = main(["gsmatrix", "--spec", str(SPECS / "free_cylinder.surf"), str(a),
               "--out", str(out), "--no-plot"])
    assert rc == 0


def test_overflow_exit(tmp_path, capsys):
    a = tmp_path / "a.txt"
    a.write_text("100000 1 0\n")
    rc = main(["gsmatrix", "--spec", str(SPECS / "free_cylinder.surf"), str(a), "--no-plot"])
    assert rc == 3
    assert "max safe" in capsys.readouterr().err


def test_decreasing_times_rejected():
    rc = main(["invert", "--spec", str(SPECS / "strip.surf"), "--T", "0.5,0.3", "--no-plot"])
    assert rc == 2


def test_smatrix_figure_and_determinism(tmp_path):
    args = ["smatrix", "--spec", str(SPECS / "warped.surf"), "--k", "0.5:1.5:0.5"]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(args + ["--out", str(a)]) == 0
    assert a.with_suffix(".png").stat().st_size > 0
    assert main(args + ["--out", str(b), "--no-plot"]) == 0
    assert _body(a) == _body(b)
    assert not b.with_suffix(".png").exists()


def test_manifest_header(tmp_path):
    out = tmp_path / "m.txt"
    assert main(["bessel", "2i", "--x", "1:5:1", "--out", str(out), "--no-plot"]) == 0
    head = [ln for ln in out.read_text().splitlines() if ln.startswith("#")]
    assert any("command" in ln for ln in head)
    assert len(_body(out)) > 1


def test_verify(tmp_path):
    assert main(["verify", "--out", str(tmp_path / "v.txt")]) == 0


def test_output_directory_created(tmp_path):
    out = tmp_path / "deep" / "dir" / "c.txt"
    assert main(["classify", "2", "0", "0", "0.5", "--out", str(out)]) == 0
    assert out.exists()
