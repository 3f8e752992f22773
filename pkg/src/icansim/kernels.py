"""Hot-loop kernels: compiled extension when built, numpy otherwise.

Set ``ICANSIM_PURE_PYTHON=1`` to force the numpy path.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("ICANSIM_PURE_PYTHON"):
        raise ImportError("pure-python kernels requested")
    from . import _kernels_c as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

aggregate_beam_power = _impl.aggregate_beam_power
