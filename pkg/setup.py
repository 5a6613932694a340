"""Build the optional compiled kernels.

The package is pure Python plus one Cython extension with hand-written
hot loops (impulse accumulation, causal convolution, per-voxel Pearson).
If Cython or a C compiler is unavailable the build falls through and the
package runs on the numpy fallback selected at import time.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/encscale/kernels/_speed.pyx"],
        language_level=3,
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
        # -O3 vectorizes the unit-stride inner loops; no fast-math, so
        # summation order and results are unchanged
        ext.extra_compile_args = ["-O3"]
except ImportError as e:
    print(f"building without compiled kernels: {e}", file=sys.stderr)

setup(ext_modules=ext_modules)
