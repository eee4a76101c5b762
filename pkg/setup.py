"""Build the optional Cython kernels.

If Cython or a C compiler is missing the package still installs and falls back
to the numpy kernels at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "graphindex._ckernels",
            ["src/graphindex/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
