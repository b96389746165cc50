"""Kernel selection.

The compiled extension is used when importable; ``TOURMAP_PURE=1`` forces
the numpy fallback. Both expose the same functions with identical output.

Random streams
--------------
Permutation draws come from a counter-based generator: the u-th uniform of
stream ``key`` is ``mix64(key + (u + 1) * 0x9E3779B97F4A7C15) >> 11``
scaled by 2**-53, where ``mix64`` is the SplitMix64 finaliser. The stream
key for zone i under master seed s is ``stream_key(s, i)``. Because a
zone's draws depend only on (s, i), zones can be processed in any order or
on any number of threads without changing results.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("TOURMAP_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _fallback


def get(name, backend=None):
    """Return kernel ``name`` from ``backend`` ('compiled', 'python' or current)."""
    if backend is None or backend == BACKEND:
        return getattr(_impl, name)
    if backend == "python":
        return getattr(_fallback, name)
    if backend == "compiled":
        from . import _kernels
        return getattr(_kernels, name)
    raise ValueError(f"unknown backend {backend!r}")


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def stream_key(seed, index):
    """Stream key of task ``index`` (zone number) under master ``seed``."""
    base = _fallback.mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _fallback.mix64(base ^ _fallback.mix64(idx * _fallback.GOLDEN + np.uint64(1)))
