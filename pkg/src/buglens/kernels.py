"""Backend selection for the numeric kernels.

The Cython extension is preferred; the numpy fallback is used when it is not
importable or when ``BUGLENS_PURE_PYTHON=1`` is set in the environment.
"""

import os

from buglens import _pykernels

if os.environ.get("BUGLENS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from buglens import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

bisect_matrix = _impl.bisect_matrix
mismatch_matrix = _impl.mismatch_matrix
fpf_order = _impl.fpf_order


def backends():
    """Map of backend name to module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from buglens import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
