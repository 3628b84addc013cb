"""Optional numba acceleration.

Set ``PROMIS_DISABLE_NUMBA=1`` to force the pure numpy kernels. When numba
cannot be imported the numpy kernels are used as well.
"""

from __future__ import annotations

import os
import warnings
from typing import Any, Callable

# The system TBB is too old for numba; it falls back to another layer anyway.
warnings.filterwarnings("ignore", message=".*TBB.*", module="numba")

try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is installed in CI
    numba = None
    NUMBA_AVAILABLE = False
    prange = range

    def njit(*args: Any, **kwargs: Any) -> Callable:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _flag_set(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = NUMBA_AVAILABLE and not _flag_set("PROMIS_DISABLE_NUMBA")

__all__ = ["NUMBA_AVAILABLE", "USE_NUMBA", "njit", "prange"]
