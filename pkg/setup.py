"""Build script for the optional compiled core.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed extension build only costs speed.
"""

import os

import numpy
import numpy.random
from setuptools import Extension, setup

_NPY_RANDOM_LIB = os.path.join(os.path.dirname(numpy.random.__file__), "lib")

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ssaltplan._core",
                ["src/ssaltplan/_core.pyx"],
                include_dirs=[numpy.get_include()],
                library_dirs=[_NPY_RANDOM_LIB],
                libraries=["npyrandom"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
