"""Per-cube kernels with a compiled core and a numpy fallback.

The backend is fixed at import time: the Cython extension ``_ckernels`` when
it was built, otherwise ``_pykernels``. Set ``WHARDY_PURE_PYTHON=1`` to force
the fallback. Both modules expose the same four functions.
"""

import os

from . import _pykernels as py_backend

c_backend = None
if not os.environ.get("WHARDY_PURE_PYTHON"):
    try:
        from . import _ckernels as c_backend  # type: ignore[no-redef]
    except ImportError:
        c_backend = None

backend = c_backend if c_backend is not None else py_backend
BACKEND_NAME = "cython" if c_backend is not None else "numpy"

cube_reduce = backend.cube_reduce
expand_cubes = backend.expand_cubes
dyadic_maximal = backend.dyadic_maximal
pair_smoothness = backend.pair_smoothness

__all__ = [
    "BACKEND_NAME",
    "backend",
    "c_backend",
    "py_backend",
    "cube_reduce",
    "expand_cubes",
    "dyadic_maximal",
    "pair_smoothness",
]
