"""Selects the kernel backend at import time.

The compiled extension is used when it imported successfully; otherwise the
NumPy twin takes over.  Set APCONES_BACKEND=python to force the fallback
(used by the benchmark and by cross-backend tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("APCONES_BACKEND", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

q_node_pass = _impl.q_node_pass
sor_color_pass = _impl.sor_color_pass
projected_residual = _impl.projected_residual


def backend_name() -> str:
    return _impl.BACKEND
