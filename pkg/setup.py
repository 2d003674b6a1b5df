"""Build script for the compiled kernel extension.

The package runs without it (the pure-numpy backend is the fallback at
import time); building it is what makes the desk-scale workloads fast.
"""

from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "wavectrl.kernels._native",
        ["src/wavectrl/kernels/_native.pyx"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
