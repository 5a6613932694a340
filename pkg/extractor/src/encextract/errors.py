"""Typed failures.

InputError covers anything the caller handed us (files, flags, model ids);
AlignmentError is the subset where text and tokenization cannot be
reconciled, and its message always carries character offsets into the text.
"""


class ExtractorError(Exception):
    """Base class for every error this package raises on purpose."""


class InputError(ExtractorError):
    """The caller's files or arguments are unusable."""


class AlignmentError(InputError):
    """Words and tokens cannot be reconciled; message includes text offsets."""
