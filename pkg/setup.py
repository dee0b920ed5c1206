import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Set ANONLEARN_NO_EXT=1 to install without the compiled core (pure-Python fallback).
ext_modules = []
if not os.environ.get("ANONLEARN_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "anonlearn._ckernels",
                ["src/anonlearn/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
