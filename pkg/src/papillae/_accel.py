"""Numba switch for the hot kernels.

Set ``PAPILLAE_DISABLE_NUMBA=1`` (or run without numba installed) to force the
pure-numpy code paths. Kernels that have both implementations check
``USE_NUMBA`` at call time, so the flag may also be flipped in-process by
tests and benchmarks via :func:`set_numba`.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _flag_from_env():
    value = os.environ.get("PAPILLAE_DISABLE_NUMBA", "").strip().lower()
    return value not in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and _flag_from_env()


def set_numba(enabled):
    """Enable or disable the numba kernels; returns the previous setting."""
    global USE_NUMBA
    previous = USE_NUMBA
    USE_NUMBA = bool(enabled) and HAVE_NUMBA
    return previous


def use_numba():
    return USE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)
