"""Encoding-model scaling analysis for naturalistic fMRI.

Per-word feature matrices go in, HRF-convolved design matrices are fit to
BOLD with nested cross-validated ridge, and the resulting per-voxel score
maps feed scaling-law fits, inter-subject reliability normalization, and
left/right asymmetry statistics.  A synthetic-study generator with known
ground truth backs the test suite.
"""

__version__ = "0.1.0"

from .errors import EncscaleError, InputError, NumericError

__all__ = ["EncscaleError", "InputError", "NumericError", "__version__"]
