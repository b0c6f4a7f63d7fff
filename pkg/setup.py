"""Build script: compiles the optional Cython GaBP kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile is downgraded to a warning.
"""
import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ufft/_gabp_cy.pyx"],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
except Exception as exc:  # pragma: no cover - build-env dependent
    warnings.warn(f"Cython kernel not built ({exc}); using NumPy fallback")

setup(ext_modules=ext_modules)
