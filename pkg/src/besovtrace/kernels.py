"""Select the compiled kernels when available, the numpy versions otherwise.

Set ``BESOVTRACE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

IMPLEMENTATION = "python"
if os.environ.get("BESOVTRACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        IMPLEMENTATION = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
else:
    _impl = _kernels_py

rademacher = _impl.rademacher
signed_block_sum = _impl.signed_block_sum

__all__ = ["IMPLEMENTATION", "rademacher", "signed_block_sum"]
