"""JIT switch for the hot kernels.

Kernels come in two flavours: a loop version compiled with numba and a
vectorised numpy version.  ``GRIDMARKET_NUMBA=0`` (or a missing numba)
selects the numpy path everywhere.
"""
import os

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("GRIDMARKET_NUMBA", "1").lower() not in ("0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def pick(jitted, fallback, use_numba=None):
    if use_numba is None:
        use_numba = USE_NUMBA
    return jitted if use_numba else fallback
