"""Kernel backend selection.

The compiled extension is used when available; set ``PHOTONSTAT_PURE=1`` to
force the numpy/Python fallbacks (used by the benchmark and the backend
equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("PHOTONSTAT_PURE", "0") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _fastext as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

decode_words = _impl.decode_words
pair_lags = _impl.pair_lags
dead_time_filter = _impl.dead_time_filter
