"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-python backend is selected at
import time), so a failed compile downgrades to a warning instead of aborting
the install.
"""
import warnings

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "rolldisc._kernels",
            ["src/rolldisc/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    warnings.warn(f"Cython extension skipped ({exc}); pure-python backend will be used")

setup(ext_modules=ext_modules)
