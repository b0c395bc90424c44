"""Build the optional Cython kernel extension.

If Cython or a C compiler is unavailable the package still installs; the
numpy kernels in ``whardy._kernels._pykernels`` are used instead.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("WHARDY_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "whardy._kernels._ckernels",
                    ["src/whardy/_kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
