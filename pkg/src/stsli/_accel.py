"""Numba switch.

Set ``STSLI_DISABLE_NUMBA=1`` before import to run every hot kernel through
its pure numpy/python fallback.  ``STSLI_NUM_THREADS`` caps numba's thread
pool.
"""
import os

_FALSY = ("", "0", "false", "no", "off")

DISABLED = os.environ.get("STSLI_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    if DISABLED:
        raise ImportError
    import numba

    if not os.environ.get("NUMBA_THREADING_LAYER"):
        # the tbb layer probes versions noisily; workqueue is always present
        numba.config.THREADING_LAYER = "workqueue"
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


_backend = "numba" if HAVE_NUMBA else "numpy"


def use_numba():
    return _backend == "numba"


def get_backend():
    return _backend


def set_backend(name):
    """Switch hot kernels between ``"numba"`` and ``"numpy"`` at runtime."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is disabled or not installed")
    _backend = name


def set_threads(n=None):
    """Set numba's thread count; falls back to ``STSLI_NUM_THREADS``."""
    if n is None:
        env = os.environ.get("STSLI_NUM_THREADS")
        if not env:
            return
        n = int(env)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if HAVE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
