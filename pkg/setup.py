"""Build the optional Cython kernels; the package falls back to numpy if this fails."""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("GMFSIM_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "gmfsim._ckernels",
                    ["src/gmfsim/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
