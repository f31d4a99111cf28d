"""Select between numba-compiled kernels and the pure-numpy fallback.

Set ``SCOD_NUMBA=0`` to force the numpy path. With the variable unset the
numba path is used whenever numba imports cleanly.
"""
import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    HAVE_NUMBA = False


def _flag_enabled():
    value = os.environ.get("SCOD_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _flag_enabled()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap
