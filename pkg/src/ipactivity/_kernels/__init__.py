"""Record-parsing kernels.

The compiled backend is preferred when present; set IPACTIVITY_PURE_PYTHON=1
to force the pure Python one. Both expose the same parse_activity signature
and accept the same grammar.
"""

import os

if os.environ.get("IPACTIVITY_PURE_PYTHON", "") not in ("", "0"):
    from . import _fallback as _impl
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
parse_activity = _impl.parse_activity

__all__ = ["BACKEND", "parse_activity"]
