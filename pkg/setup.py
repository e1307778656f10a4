"""Builds the optional Cython kernel extension.

The package works without it (a pure-numpy fallback is selected at import);
set IABNET_NO_EXT=1 to skip the extension build entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("IABNET_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "iabnet._kernels",
                    ["src/iabnet/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
