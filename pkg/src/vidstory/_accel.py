"""Numba switch.

Hot kernels are written as plain loops and compiled with ``numba.njit`` when
numba is importable and ``VIDSTORY_NUMBA`` is not set to a false value
(``0``, ``false``, ``no``, ``off``). Otherwise callers get the vectorized numpy
implementation of the same kernel.
"""

from __future__ import annotations

import os

_FALSE = {"0", "false", "no", "off"}

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def numba_requested() -> bool:
    return os.environ.get("VIDSTORY_NUMBA", "1").strip().lower() not in _FALSE


USE_NUMBA = HAS_NUMBA and numba_requested()


def njit(fn):
    """``numba.njit(cache=True)`` when numba is usable, identity otherwise."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def engine_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
