"""Content-free control features."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InputError


def random_features(
    words: tuple[str, ...] | list[str], dim: int, seed: int = 0
) -> np.ndarray:
    """Deterministic Gaussian vector per word type.

    The vector depends only on the word's spelling and the seed, so repeated
    words share a row and separate runs of the same stimulus agree exactly.
    """
    if dim < 1:
        raise InputError(f"dim must be positive, got {dim}")
    if not words:
        raise InputError("no words")
    rows = np.empty((len(words), dim), dtype=np.float32)
    cache: dict[str, np.ndarray] = {}
    for i, word in enumerate(words):
        vec = cache.get(word)
        if vec is None:
            key = int.from_bytes(
                hashlib.blake2s(word.encode("utf-8"), digest_size=8).digest(), "big"
            )
            rng = np.random.default_rng([seed, key])
            vec = rng.standard_normal(dim).astype(np.float32)
            cache[word] = vec
        rows[i] = vec
    return rows
