"""Warp kernel backend selection: compiled extension if built, numpy otherwise.

Set MAKEUPLAB_PURE_PYTHON=1 to force the numpy fallback (used by the
benchmark and by tests that compare the two backends).
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MAKEUPLAB_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

warp_coords = _impl.warp_coords
bilinear_sample = _impl.bilinear_sample


def backends():
    """All importable kernel backends, keyed by name (for benchmarks/tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out
