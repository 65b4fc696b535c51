"""Kernel selection: the compiled extension when importable, else numpy.

Set ``MORPHOCOMP_PURE_PYTHON=1`` to force the numpy kernel.
"""
import os

from . import _pykernel

try:
    from . import _kernel as _ckernel
except ImportError:  # extension not built
    _ckernel = None

KERNELS = {"python": _pykernel.run_steps}
if _ckernel is not None:
    KERNELS["cython"] = _ckernel.run_steps

if _ckernel is not None and os.environ.get("MORPHOCOMP_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "cython"
else:
    BACKEND = "python"


def get_kernel(name=None):
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(KERNELS)}") from None
