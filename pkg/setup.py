"""Build script for the optional compiled recursion kernel.

The package works without the extension: ``lpvssa.kernels`` falls back to a
numpy implementation when ``lpvssa._recursion`` cannot be imported.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("LPVSSA_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "lpvssa._recursion",
                    ["src/lpvssa/_recursion.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
