"""Kernel backend selection.

Hot numeric loops are compiled with numba when it is importable and the
MTLASSO_DISABLE_NUMBA environment variable is unset/false; otherwise the
same functions run as plain numpy.  The pure-numpy twin of a jitted
kernel is always reachable through its ``py_func`` attribute, which is
what the benchmark and the backend-agreement tests use.
"""

import os

_flag = os.environ.get("MTLASSO_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and not NUMBA_DISABLED


def jit(func):
    """njit when the numba backend is active, identity otherwise."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def plain(func):
    """The pure-numpy callable behind a possibly-jitted kernel."""
    return getattr(func, "py_func", func)
