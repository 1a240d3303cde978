"""Numba switch for the hot kernels.

Every accelerated kernel in the package has two implementations: a loop
version compiled with ``numba.njit`` and a vectorised numpy version.  The
numba path is used when numba imports and ``FINER_DISABLE_NUMBA`` is unset
(or ``0``).  ``backend("numpy")`` forces the fallback inside a block, which
is how the tests and ``benchmarks/bench_kernels.py`` compare the two.
"""
import contextlib
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

HAVE_NUMBA = numba is not None

_disabled = os.environ.get("FINER_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
_use_numba = HAVE_NUMBA and not _disabled


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def use_numba():
    return _use_numba


def active_backend():
    return "numba" if _use_numba else "numpy"


@contextlib.contextmanager
def backend(name):
    """Temporarily select ``"numba"`` or ``"numpy"`` kernels."""
    global _use_numba
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev = _use_numba
    _use_numba = name == "numba"
    try:
        yield
    finally:
        _use_numba = prev
