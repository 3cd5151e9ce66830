# Builds the optional Cython kernels.  When Cython or a compiler is missing the
# package still installs and falls back to the numpy implementations.
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HANDBALL_ORACLE_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "handball_oracle._kernels",
                    ["src/handball_oracle/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
