"""Static word vectors as a parameter-free baseline."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputError


def glove_features(
    words: tuple[str, ...] | list[str],
    vectors_path: str | Path,
    dim: int = 300,
) -> tuple[np.ndarray, int]:
    """Look up one vector per word from a text-format embedding file.

    Lookup tries the word as written, then case-folded (published GloVe
    vocabularies are lowercase).  Missing words get a zero row; the second
    return value counts them.  Only vectors for requested words are parsed,
    so the full 2 GB file streams through without being held in memory.
    """
    vectors_path = Path(vectors_path)
    if not vectors_path.is_file():
        raise InputError(f"vectors file not found: {vectors_path}")
    if not words:
        raise InputError("no words to look up")

    wanted: set[str] = set()
    for w in words:
        wanted.add(w)
        wanted.add(w.casefold())

    table: dict[str, np.ndarray] = {}
    with open(vectors_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token, _, rest = line.rstrip("\n").partition(" ")
            if token not in wanted or token in table:
                continue
            values = rest.split(" ")
            if len(values) != dim:
                raise InputError(
                    f"{vectors_path}:{lineno}: expected {dim} values, "
                    f"got {len(values)}"
                )
            try:
                table[token] = np.array(values, dtype=np.float32)
            except ValueError:
                raise InputError(
                    f"{vectors_path}:{lineno}: non-numeric vector entry"
                ) from None

    matrix = np.zeros((len(words), dim), dtype=np.float32)
    n_missing = 0
    for i, w in enumerate(words):
        row = table.get(w)
        if row is None:
            row = table.get(w.casefold())
        if row is None:
            n_missing += 1
        else:
            matrix[i] = row
    return matrix, n_missing
