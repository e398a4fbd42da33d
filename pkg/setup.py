"""Build the optional compiled transfer-matrix kernel.

The package works without it (a numpy fallback is selected at import), so a
missing compiler only downgrades speed.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("NFCAVITY_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "nfcavity._chain",
                ["src/nfcavity/_chain.pyx"],
                include_dirs=[np.get_include()],
                # textbook complex mul/div: operands stay far from overflow
                extra_compile_args=["-O3", "-fcx-limited-range"],
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
