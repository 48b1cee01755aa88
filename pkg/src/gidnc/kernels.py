"""Graph kernels, compiled when available.

Set ``GIDNC_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("GIDNC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ext as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

build_adjacency = _impl.build_adjacency
connectivity = _impl.connectivity
greedy_pass = _impl.greedy_pass
