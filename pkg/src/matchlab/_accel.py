"""Optional numba acceleration.

Kernels in this package are written in the numba-compatible subset of
numpy and decorated with :func:`njit` from here.  Setting the environment
variable ``MATCHLAB_DISABLE_NUMBA=1`` (before import) turns the decorator
into a no-op so the same source runs as plain numpy; the same happens when
numba is not installed.
"""

import os

_DISABLED = os.environ.get("MATCHLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _numba_njit

    NUMBA_ENABLED = True
except ImportError:
    _numba_njit = None
    NUMBA_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit`` with ``cache=True`` by default, or identity if disabled."""
    if not NUMBA_ENABLED:
        return func if func is not None else (lambda f: f)
    kwargs.setdefault("cache", True)
    if func is None:
        return _numba_njit(**kwargs)
    return _numba_njit(**kwargs)(func)
