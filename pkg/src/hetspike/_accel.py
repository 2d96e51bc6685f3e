"""Optional numba acceleration.

Set ``HETSPIKE_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  The
flag is read once, at import time.
"""
import os

_FLAG = os.environ.get("HETSPIKE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and _FLAG not in {"1", "true", "yes", "on"}


def njit(func):
    """Compile ``func`` in nopython mode when numba is available.

    The undecorated function is returned otherwise, so callers must not rely
    on numba-only semantics.
    """
    if numba is None:
        return func
    return numba.njit(cache=True, fastmath=False)(func)
