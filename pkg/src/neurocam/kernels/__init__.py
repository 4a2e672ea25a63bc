"""Backend dispatch for the hot numeric kernels.

The numba backend is used by default. Set NEUROCAM_NO_NUMBA=1 to force
the pure-numpy fallback (also selected automatically when numba cannot
be imported). `benchmarks/bench_kernels.py` compares the two.
"""

import os

_flag = os.environ.get("NEUROCAM_NO_NUMBA", "").strip().lower()
_want_numba = _flag not in ("1", "true", "yes")

if _want_numba:
    try:
        from . import numba_backend as _impl
        _backend = "numba"
    except ImportError:
        from . import numpy_backend as _impl
        _backend = "numpy"
else:
    from . import numpy_backend as _impl
    _backend = "numpy"

conv3d_forward = _impl.conv3d_forward
conv3d_backward = _impl.conv3d_backward
maxpool3d_forward = _impl.maxpool3d_forward
maxpool3d_backward = _impl.maxpool3d_backward


def backend_name():
    return _backend
