import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the package falls back to numpy at import time
    cythonize = None


def extensions():
    if cythonize is None or os.environ.get("ELASTOFDS_NO_EXT"):
        return []
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    # binaries for other machines: ELASTOFDS_PORTABLE=1 drops the host-specific tuning
    arch = [] if os.environ.get("ELASTOFDS_PORTABLE") else ["-march=native"]
    ext = Extension(
        "elastofds._galerkin",
        ["src/elastofds/_galerkin.pyx"],
        include_dirs=[np.get_include(), "src/elastofds"],
        extra_compile_args=["-O3", "-fno-math-errno", "-Wno-psabi"] + arch + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
