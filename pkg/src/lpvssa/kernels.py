"""Backend selection for the state-recursion kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``LPVSSA_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

import numpy as np

from . import _recursion_py

logger = logging.getLogger(__name__)

_impl = _recursion_py
BACKEND = "python"
if os.environ.get("LPVSSA_PURE_PYTHON", "") != "1":
    try:
        from . import _recursion as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        logger.debug("compiled kernels unavailable, using numpy fallback")


def backends():
    """Map of available backend name to kernel module."""
    out = {"python": _recursion_py}
    if BACKEND == "cython":
        out["cython"] = _impl
    return out


def _prepare(arrays):
    return [np.ascontiguousarray(a, dtype=np.float64) for a in arrays]


def run_simulate(A, B, K, C, D, u, mu, v, limit, impl=None):
    impl = impl or _impl
    return impl.simulate(*_prepare([A, B, K, C, D, u, mu, v]), float(limit))


def run_predict(A, B, K, C, D, u, mu, y, limit, impl=None):
    impl = impl or _impl
    return impl.predict(*_prepare([A, B, K, C, D, u, mu, y]), float(limit))
