"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``MIXLAB_PURE`` is set to a non-empty value other than
``0``) the numpy fallback is used.  ``BACKEND`` names the active choice.
"""

import os

from mixlab import _pykernels

if os.environ.get("MIXLAB_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from mixlab import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

dobrushin = _impl.dobrushin
bottleneck_min = _impl.bottleneck_min

__all__ = ["BACKEND", "dobrushin", "bottleneck_min"]
