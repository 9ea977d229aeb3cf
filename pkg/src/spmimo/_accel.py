"""Backend switch for the compiled kernels.

Set ``SPMIMO_DISABLE_NUMBA=1`` to force the pure-numpy code paths, e.g. to
compare both in ``benchmarks/bench_kernels.py`` or to debug a kernel.
"""
import os

_FLAG = "SPMIMO_DISABLE_NUMBA"

NUMBA_DISABLED = os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    Kernels are always compiled when numba is installed, even if the env flag
    routes dispatch to the numpy path, so the benchmark can time both.
    """
    kwargs.setdefault("cache", True)
    if _numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
