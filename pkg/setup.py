"""Build the optional compiled kernels.

The package works without them: ``rsdcm._kernels`` falls back to the
NumPy implementations in ``rsdcm._pykernels`` when the extension is absent.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RSDCM_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        directives = {
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
            "embedsignature": True,
        }
        ext_modules = cythonize(
            [
                Extension(
                    "rsdcm._ckernels",
                    ["src/rsdcm/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives=directives,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
