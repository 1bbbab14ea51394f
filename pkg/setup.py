"""Build script: compiles the optional Cython kernel module.

Set STGIBBS_NO_EXT=1 to skip the extension entirely; the package then runs on
the pure numpy fallback in ``stgibbs._kernels.reference``.
"""

import os

from setuptools import setup

if os.environ.get("STGIBBS_NO_EXT"):
    setup()
else:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = [
        Extension(
            "stgibbs._kernels._core",
            ["src/stgibbs/_kernels/_core.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
    ]
    setup(ext_modules=cythonize(extensions, language_level=3))
