"""Numba shim: JIT the hot kernels when available, fall back to plain Python.

The backend is chosen once at import time from the STEREOCOMFORT_NUMBA
environment variable:

    auto (default)  use numba if it imports, otherwise plain Python
    1 / on          require numba; ImportError propagates if missing
    0 / off         force the pure numpy/Python path even if numba exists

With numba active every kernel keeps its interpreted original on the
``.py_func`` attribute, which is what the benchmark and the agreement tests
compare against.
"""

import os
import warnings

_FLAG = os.environ.get("STEREOCOMFORT_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "off", "false", "no"):
    NUMBA_ENABLED = False
elif _FLAG in ("1", "on", "true", "yes", "require"):
    from numba import njit  # noqa: F401

    NUMBA_ENABLED = True
else:
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        warnings.warn(
            "numba not importable; kernels run interpreted and will be slow"
        )
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorate(func):
            return func

        return decorate


def python_impl(fn):
    """Return the interpreted implementation backing a kernel."""
    return getattr(fn, "py_func", fn)
