"""Backend selection for the GaBP stage kernels.

The compiled Cython kernel is used when available; setting UFFT_FORCE_NUMPY=1
(or a failed build) selects the pure NumPy implementation. Both expose the
same stage_forward / stage_backward signatures and are tested for parity.
"""
import os

from . import _gabp_np

if os.environ.get("UFFT_FORCE_NUMPY"):
    _impl = _gabp_np
else:
    try:
        from . import _gabp_cy as _impl
    except ImportError:
        _impl = _gabp_np

BACKEND = _impl.BACKEND
stage_forward = _impl.stage_forward
stage_backward = _impl.stage_backward
