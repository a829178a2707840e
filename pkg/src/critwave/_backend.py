"""Kernel backend chosen at import.

The compiled extension is used when it imports; setting
CRITWAVE_BACKEND=python forces the numpy fallback.
"""

import os

from . import _purepy

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _purepy}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def get_backend(name=None):
    if name is None:
        return kernels
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_BACKENDS)}") from None


def available():
    return sorted(_BACKENDS)


_requested = os.environ.get("CRITWAVE_BACKEND", "").strip().lower()
if _requested == "python" or _ckernels is None:
    kernels, BACKEND = _purepy, "python"
else:
    kernels, BACKEND = _ckernels, "cython"
