"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` loop version and a plain
numpy version.  ``EVDNR_DISABLE_NUMBA=1`` (or a missing numba install)
selects the numpy path everywhere.
"""
import os

_FLAG = os.environ.get("EVDNR_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
