"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy fallback is
selected at import time), so a failed compile only costs speed.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SAPD_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "sapd._core",
                    ["src/sapd/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
