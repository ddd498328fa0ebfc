"""Hot loops with a compiled backend and a numpy fallback.

The Cython extension ``hpm._kernels`` is used when it was built; otherwise, or
when ``HPM_PURE_PYTHON=1`` is set, the functions come from ``hpm._pykernels``.

Autocorrelation always goes through the numpy FFT path: it is O(W log W) per
frame and beats the compiled direct sum (O(W * lags)) at every window size we
use.  The direct sum stays available as ``frame_autocorr_direct``; see
``benchmarks/bench_kernels.py``.
"""

import os

from . import _pykernels as python

try:
    if os.environ.get("HPM_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from . import _kernels as compiled
except ImportError:
    compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

dtw_accumulate = _impl.dtw_accumulate
dtw_backtrack = _impl.dtw_backtrack
frame_autocorr = python.frame_autocorr
frame_autocorr_direct = _impl.frame_autocorr
