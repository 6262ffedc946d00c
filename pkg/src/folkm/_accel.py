"""Backend selection for the numeric hot loops.

Kernels are compiled with numba by default. Setting the environment variable
``FOLKM_NO_NUMBA=1`` (or numba being unavailable) selects the pure
NumPy/Python fallback: the same function bodies run uncompiled, so both
backends compute the same thing.
"""

import os

_disabled = os.environ.get("FOLKM_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _disabled:
    try:
        from numba import njit as _njit
        USING_NUMBA = True
    except ImportError:  # pragma: no cover
        USING_NUMBA = False
else:
    USING_NUMBA = False


def jit_kernel(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged.

    Compiled kernels keep the original function on ``.py_func``, which the
    benchmark uses to time the fallback path without re-importing.
    """
    if USING_NUMBA:
        return _njit(cache=True)(fn)
    return fn
