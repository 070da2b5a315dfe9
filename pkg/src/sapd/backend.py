"""Import-time kernel backend selection.

The compiled extension is preferred when present; setting the
environment variable ``SAPD_BACKEND=numpy`` forces the pure-numpy
fallback (useful for cross-checking and debugging). ``SAPD_THREADS``
caps the worker count used by the benchmark harness; the kernels
themselves are single-threaded per snapshot.
"""
from __future__ import annotations

import os

from . import _kernels as _numpy_impl

if os.environ.get("SAPD_BACKEND", "").lower() == "numpy":
    impl = _numpy_impl
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _numpy_impl


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'numpy')."""
    return impl.BACKEND_NAME


def numpy_impl():
    """The pure-numpy kernel module, always available."""
    return _numpy_impl


def thread_limit() -> int:
    """Worker cap from SAPD_THREADS (at least 1)."""
    try:
        return max(1, int(os.environ.get("SAPD_THREADS", "1")))
    except ValueError:
        return 1
