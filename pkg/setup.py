"""Build script: compiles the optional Cython kernel backend.

The package works without the extension (a numpy backend is selected at
import time), so a failed compile only costs speed, never correctness.
"""

import os

from setuptools import setup

PYX = "src/clore/diffmath/kernels/_ckernels.pyx"

ext_modules = []
try:
    from Cython.Build import cythonize

    if os.path.exists(PYX):
        ext_modules = cythonize([PYX], language_level=3)
except ImportError:
    print("Cython not available; building with the pure numpy kernel backend only.")

setup(ext_modules=ext_modules)
