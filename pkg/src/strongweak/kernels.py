"""Hot kernels: compiled extension when available, numpy fallback otherwise.

Set ``STRONGWEAK_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names
the implementation in use.
"""
import os

from . import _kernels_py

OK, NODE, OFF_GRID = _kernels_py.OK, _kernels_py.NODE, _kernels_py.OFF_GRID

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("STRONGWEAK_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

sample_piecewise = _impl.sample_piecewise
histogram = _impl.histogram
integrate_trajectories = _impl.integrate_trajectories

__all__ = ["BACKEND", "OK", "NODE", "OFF_GRID", "sample_piecewise", "histogram",
           "integrate_trajectories"]
