"""Hot-kernel dispatch: compiled extension when available, NumPy otherwise.

Set ``RVETC_PURE_PYTHON=1`` to force the fallback regardless of what is
installed (useful for benchmarking and for debugging the extension).
"""
from __future__ import annotations

import os

from rvetc.kernels import fallback as _fallback

if os.environ.get("RVETC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from rvetc.kernels import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

rk4_two_body = _impl.rk4_two_body
qp_box_fista = _impl.qp_box_fista
kkt_residual_box = _impl.kkt_residual_box


def backend_name() -> str:
    """'native' when the compiled extension is active, else 'fallback'."""
    return _impl.BACKEND


def _native_available():
    """The compiled module if importable (for benchmarks/tests), else None."""
    try:
        from rvetc.kernels import _native
        return _native
    except ImportError:
        return None
