"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when
``RDB_REGIONS_PURE=1`` is set, the numpy fallback is used.  Both expose
identical functions.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("RDB_REGIONS_PURE"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

inner_source_stats = backend.inner_source_stats
inner_source_scan = backend.inner_source_scan
bc_scan = backend.bc_scan
outer_stats = backend.outer_stats
inner_full_slacks = backend.inner_full_slacks

__all__ = [
    "BACKEND_NAME",
    "backend",
    "bc_scan",
    "compiled_backend",
    "inner_full_slacks",
    "inner_source_scan",
    "inner_source_stats",
    "outer_stats",
    "python_backend",
]
