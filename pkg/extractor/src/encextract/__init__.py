"""Per-word feature extraction for fMRI encoding studies.

Turns a stimulus transcript plus word-level events into per-layer activation
matrices from a causal language model, with GloVe and random-vector
baselines and a NIfTI-to-matrix converter on the side.  Outputs are plain
``.npy`` matrices and JSON manifests, ready for downstream encoding fits.
"""

from .align import WordAlignment, align_words, mergeable
from .baselines import random_features
from .errors import AlignmentError, ExtractorError, InputError
from .extract import extract, write_features
from .glove import glove_features
from .io import Events, read_events
from .nifti import VoxelGeometry, convert_nifti, read_volume

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "Events",
    "ExtractorError",
    "InputError",
    "VoxelGeometry",
    "WordAlignment",
    "align_words",
    "convert_nifti",
    "extract",
    "glove_features",
    "mergeable",
    "random_features",
    "read_events",
    "read_volume",
    "write_features",
    "__version__",
]
