"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback. ``LEVY_ISAMP_BACKEND=python|compiled`` forces a choice.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS = {"python": _kernels_py}
if _kernels_c is not None:
    BACKENDS["compiled"] = _kernels_c


def get_backend(name=None):
    name = name or os.environ.get("LEVY_ISAMP_BACKEND") or ("compiled" if _kernels_c else "python")
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


kernels = get_backend()
