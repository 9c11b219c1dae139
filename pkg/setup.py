import os

import numpy as np
from setuptools import Extension, setup

# BUCKETEER_NO_EXT=1 builds the pure-Python package only.
ext_modules = []
if not os.environ.get("BUCKETEER_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "bucketeer._core",
                    ["src/bucketeer/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no -ffast-math: the Z mapping must round like the fallback
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
