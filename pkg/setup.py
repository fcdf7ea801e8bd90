"""Build script: compiles the optional Louvain extension.

If Cython or a C compiler is unavailable the install proceeds without the
extension and the pure-Python kernel is used at runtime.
"""
import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "attnet._louvain_cy",
                ["src/attnet/_louvain_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"attnet: building without compiled kernel ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
