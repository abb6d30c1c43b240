"""Record files and figures written by the command-line tools."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = ["format_records", "write_output", "figure_path", "plot"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("nan" if v != v else ("inf" if v > 0 else "-inf"))
    return str(v)


def format_records(header: Sequence[tuple[str, object]], columns: Sequence[str],
                   rows: Iterable[Sequence], notes: Sequence[str] = ()) -> str:
    """Comment header, a column-name row, whitespace-separated records, trailing comment notes."""
    buf = io.StringIO()
    for k, v in header:
        buf.write(f"# {k}: {v}\n")
    buf.write(" ".join(columns) + "\n")
    for r in rows:
        buf.write(" ".join(_fmt(v) for v in r) + "\n")
    for n in notes:
        buf.write(f"# {n}\n")
    return buf.getvalue()


def write_output(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        import sys
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text, encoding="utf-8")


def figure_path(out: Optional[str]) -> Optional[Path]:
    """Figure next to the record file: same stem, .png suffix."""
    if out is None or out == "-":
        return None
    return Path(out).with_suffix(".png")


def plot(path: Path, kind: str, columns: Sequence[str], rows: Sequence[Sequence], title: str = "") -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = np.array([[float(x) for x in r] for r in rows]) if rows else np.zeros((0, len(columns)))
    col = {c: i for i, c in enumerate(columns)}
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "smatrix" and len(data):
        diag = data[(data[:, col["j"]] == data[:, col["l"]]) & (data[:, col["m"]] == data[:, col["n"]])]
        for (j, m) in sorted({(int(r[col["j"]]), int(r[col["m"]])) for r in diag}):
            sel = diag[(diag[:, col["j"]] == j) & (diag[:, col["m"]] == m)]
            ax.plot(sel[:, col["k"]], np.angle(sel[:, col["re"]] + 1j * sel[:, col["im"]]),
                    ".-", label=f"({j},{m})")
        ax.set_xlabel("k")
        ax.set_ylabel("arg S")
        if len(diag) <= 200:
            ax.legend(fontsize=6, ncol=3)
    elif kind == "gsmatrix" and len(data):
        lb = np.log10(np.hypot(data[:, col["re_b"]], data[:, col["im_b"]]) + 1e-300) + data[:, col["scale_exp"]] / math.log(10)
        ax.plot(data[:, col["n"]], lb, "o")
        ax.set_xlabel("n")
        ax.set_ylabel("log10 |b_n|")
    elif kind == "bessel" and len(data):
        ax.semilogy(data[:, col["x"]], np.maximum(data[:, col["wronskian_err"]], 1e-18), ".-")
        ax.set_xlabel("x")
        ax.set_ylabel("Wronskian relative error")
    elif kind == "bsp" and len(data):
        ax.plot(data[:, col["index"]], data[:, col["lambda"]], ".")
        ax.set_xlabel("index")
        ax.set_ylabel("eigenvalue")
    elif kind == "ndmap" and len(data):
        n = int(data[:, col["i"]].max()) + 1
        M = np.zeros((n, n))
        M[data[:, col["i"]].astype(int), data[:, col["j"]].astype(int)] = data[:, col["re"]]
        im = ax.imshow(M, cmap="viridis")
        fig.colorbar(im, ax=ax)
    elif kind == "volume" and len(data):
        ax.plot(data[:, col["r"]], data[:, col["ratio"]], "o-")
        ax.set_xlabel("r")
        ax.set_ylabel("area / (pi r^2)")
    elif kind == "invert" and len(data):
        ax.plot(data[:, col["T"]], data[:, col["area_estimate"]], "o-")
        ax.set_xlabel("T")
        ax.set_ylabel("area of the domain of influence")
    elif kind == "chart" and len(data):
        ax.plot(data[:, col["rho"]], data[:, col["r"]], ".-")
        ax.set_xlabel("rho")
        ax.set_ylabel("r")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
