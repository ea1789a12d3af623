import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

if USE_CYTHON:
    extensions = cythonize(
        [
            Extension(
                "conegeo._kernels",
                ["src/conegeo/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    # the package falls back to conegeo._fallback at import time
    extensions = []

setup(ext_modules=extensions)
