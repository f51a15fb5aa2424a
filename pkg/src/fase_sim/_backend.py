"""Pick the cache kernel at import time.

The compiled ``_core`` extension is preferred.  ``FASE_SIM_BACKEND=python``
forces the pure-Python kernel; ``FASE_SIM_BACKEND=cython`` makes a missing
extension an ImportError instead of a silent fallback.
"""
import logging
import os

from . import _core_py

log = logging.getLogger(__name__)

_requested = os.environ.get("FASE_SIM_BACKEND", "").strip().lower()

CoreCompiled = None
try:
    from ._core import CacheCore as CoreCompiled  # noqa: F401
except ImportError:
    if _requested == "cython":
        raise

CorePython = _core_py.CacheCore

if _requested == "python" or CoreCompiled is None:
    CacheCore = CorePython
    BACKEND = "python"
else:
    CacheCore = CoreCompiled
    BACKEND = "cython"

log.debug("cache kernel backend: %s", BACKEND)


def core_class(name=None):
    """Return the kernel class for ``name`` ("python"/"cython"), or the active one."""
    if name is None:
        return CacheCore
    if name == "python":
        return CorePython
    if name == "cython":
        if CoreCompiled is None:
            raise ImportError("compiled kernel fase_sim._core is not built")
        return CoreCompiled
    raise ValueError(f"unknown backend {name!r}")
