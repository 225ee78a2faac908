"""Pick the kernel implementation once, at import.

The compiled extension is preferred. Setting ``CAPDETECT_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("CAPDETECT_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _pykernels

BACKEND = kernels.NAME


def available_backends():
    """All importable kernel modules, fallback first."""
    mods = [_pykernels]
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        mods.append(_ckernels)
    return mods
