"""Numba switch.

Set ``HONEYPOT_BSG_NO_NUMBA=1`` to force the pure-numpy kernels even when numba
is importable. The flag is read once at import time.
"""

import logging
import os

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("HONEYPOT_BSG_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by HONEYPOT_BSG_NO_NUMBA")
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    logger.debug("numba unavailable (%s); using numpy kernels", exc)
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap
