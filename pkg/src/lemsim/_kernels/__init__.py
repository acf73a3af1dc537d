"""Kernel backend selection.

Prefers the compiled extension, falling back to the pure-Python twin when
the extension was not built. Set LEMSIM_PURE_PYTHON=1 to force the fallback
(used by the benchmark and the backend-parity tests).
"""

import os

if os.environ.get("LEMSIM_PURE_PYTHON"):
    from .matching_py import match_orders

    BACKEND = "python"
else:
    try:
        from ._matching import match_orders  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from .matching_py import match_orders  # type: ignore[no-redef]

        BACKEND = "python"

__all__ = ["match_orders", "BACKEND"]
