"""Scattering on hyperbolic surfaces with a cusp, and boundary-data reconstruction of conical points.

Set ``CUSPSCATTER_THREADS`` before import to cap the BLAS thread pools.
"""

import os as _os

_threads = _os.environ.get("CUSPSCATTER_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .charts import ConicalPoint, EndSpec, HFunction, SpecError, SurfaceSpec, WarpedProfile  # noqa: E402
from .specfile import load_surface, parse_surface  # noqa: E402

__all__ = [
    "__version__",
    "ConicalPoint",
    "EndSpec",
    "HFunction",
    "SpecError",
    "SurfaceSpec",
    "WarpedProfile",
    "load_surface",
    "parse_surface",
]
