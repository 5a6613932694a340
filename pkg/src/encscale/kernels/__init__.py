"""Hot-loop kernels with a compiled core and a NumPy fallback.

The compiled extension (built from ``_speed.pyx``) is preferred; if it was
not built for this interpreter the NumPy implementations are used instead.
``BACKEND`` reports which one is active.  ``benchmarks/bench_kernels.py``
compares the two.
"""

try:
    from ._speed import (  # type: ignore[attr-defined]
        BACKEND,
        accumulate_impulses,
        pearson_columns,
    )
except ImportError:
    from ._numpy import (
        BACKEND,
        accumulate_impulses,
        pearson_columns,
    )

# np.convolve's SIMD inner loop beats the compiled tap-outer accumulation
# at pipeline sizes (see benchmarks/bench_kernels.py), so every install
# convolves through the numpy implementation
from ._numpy import causal_convolve_columns

__all__ = [
    "BACKEND",
    "accumulate_impulses",
    "causal_convolve_columns",
    "pearson_columns",
]
