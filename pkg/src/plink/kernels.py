"""Hot-kernel dispatch: compiled extension if built, numpy fallback otherwise.

Set PLINK_PURE_PYTHON=1 to force the fallback (used by the benchmark and the
lane-equivalence tests). The active lane is exposed as BACKEND.
"""

from __future__ import annotations

import os

from . import _kernels_fallback as _py

if os.environ.get("PLINK_PURE_PYTHON"):
    _impl = _py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py

BACKEND: str = _impl.BACKEND

match_coincidences = _impl.match_coincidences
deadtime_filter = _impl.deadtime_filter
delta_histogram = _impl.delta_histogram
toeplitz_hash = _impl.toeplitz_hash
