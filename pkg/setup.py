"""Build script for the compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile is downgraded to a warning rather than
aborting the install.
"""

import warnings

import numpy as np
from setuptools import Extension, setup

DIRECTIVES = {
    "language_level": "3",
    "boundscheck": False,
    "wraparound": False,
    "cdivision": True,
}

ext_modules = [
    Extension(
        "mimoloc._kernels._fast",
        ["src/mimoloc/_kernels/_fast.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(ext_modules, compiler_directives=DIRECTIVES)
except ImportError:
    warnings.warn("Cython not available; building without compiled kernels")
    ext_modules = []

setup(ext_modules=ext_modules)
