"""Kernel backend selection: compiled extension if available, else pure Python.

Set HECG_PURE_PYTHON=1 to force the fallback even when the extension is
installed (used by the equivalence tests and the benchmark).
"""

import os

from . import _kernels_py

if os.environ.get("HECG_PURE_PYTHON"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

HAVE_COMPILED = bool(getattr(kernels, "COMPILED", False))


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "pure-python"
