"""Pick the compiled kernels when importable, else the Python twins.

Set ``MRFA_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("MRFA_BACKEND", "").lower() == "python":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

wendland_block = _impl.wendland_block
secular_root = _impl.secular_root
lasso_cd = _impl.lasso_cd

__all__ = ["BACKEND", "wendland_block", "secular_root", "lasso_cd"]
