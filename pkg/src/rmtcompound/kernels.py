"""Select the kernel backend at import time.

The compiled ``_kernels`` extension is used when it imports cleanly;
otherwise, or when ``RMTCOMPOUND_PURE`` is set to a non-empty value,
the numpy implementation in ``_kernels_py`` is used. ``BACKEND`` names
the active choice.
"""

import os

from . import _kernels_py

if os.environ.get("RMTCOMPOUND_PURE"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "numpy"

log_beta_integral = _impl.log_beta_integral
series_2f1 = _impl.series_2f1
series_1f1 = _impl.series_1f1
