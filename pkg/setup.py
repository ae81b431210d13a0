"""Build script: compiles the optional coordinate-descent extension.

The package works without the extension (a numpy fallback is selected at
import time), so a missing Cython or a failed compile is not fatal for
source installs.
"""
from setuptools import Extension, setup

extensions = []
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "iatc._cd_fast",
                ["src/iatc/_cd_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=extensions)
