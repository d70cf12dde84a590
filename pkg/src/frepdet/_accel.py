"""numba switch.

Set ``FREPDET_DISABLE_NUMBA=1`` to run every kernel on its pure-numpy path.
numba being absent has the same effect.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("FREPDET_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise a no-op decorator."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
