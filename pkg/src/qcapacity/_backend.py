"""Pick the eigensolver kernel at import time.

The compiled extension is used when it was built; otherwise, or when
``QCAPACITY_PURE_PYTHON`` is set to a non-empty value, the numpy fallback
is used. Both expose ``eigh`` and ``eigvalsh_batch`` with identical
semantics.
"""

import os

if os.environ.get("QCAPACITY_PURE_PYTHON"):
    from . import _jacobi_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _jacobi as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _jacobi_py as kernels
        BACKEND = "python"

eigh = kernels.eigh
eigvalsh_batch = kernels.eigvalsh_batch
