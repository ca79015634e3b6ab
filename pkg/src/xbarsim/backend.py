"""Backend selection for the hot update kernels.

The coincidence-application kernel exists twice: a numba-compiled version
and a pure-numpy fallback with identical semantics.  Which one runs is
decided once at import time from the XBARSIM_BACKEND environment variable
("numba" or "numpy"; default is numba when importable).
"""

import os

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # Transparent decorator so kernel definitions still import.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


_requested = os.environ.get("XBARSIM_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"XBARSIM_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )
if _requested == "numba" and not HAS_NUMBA:
    raise RuntimeError("XBARSIM_BACKEND=numba but numba is not importable")

USE_NUMBA = HAS_NUMBA and _requested != "numpy"


def active_backend():
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
