"""Builds the optional Cython kernel extension.

The extension is optional: if Cython or a C compiler is unavailable the
package still installs and runs on the pure-Python (numpy) kernels.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    extensions = [
        Extension(
            "rawpipe._kernels",
            ["src/rawpipe/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # no FMA contraction: keeps float sums bit-identical to the fallback
            extra_compile_args=["-O3", "-ffp-contract=off"],
            optional=True,
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
