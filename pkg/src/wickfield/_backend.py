"""Select the kernel implementation at import time.

The compiled extension is used when present; set ``WICKFIELD_BACKEND=python``
to force the NumPy fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels
compiled_kernels = None
try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("WICKFIELD_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = python_kernels
    BACKEND = "python"
