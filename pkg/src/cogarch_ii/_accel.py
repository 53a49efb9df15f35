"""Numba switch.

Set ``COGARCH_II_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. When numba is missing the numpy path is used silently.
"""
import os

_FLAG = "COGARCH_II_DISABLE_NUMBA"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get(_FLAG, "0").strip().lower() not in ("1", "true", "yes")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        from numba import njit as _njit

        return _njit(*args, **kwargs)

    def wrap(f):
        return f

    if args and callable(args[0]):
        return args[0]
    return wrap
