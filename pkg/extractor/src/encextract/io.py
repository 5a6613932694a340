"""Events input and atomic file output."""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

EVENTS_COLUMNS = ("word", "onset")


@dataclass(frozen=True)
class Events:
    words: tuple[str, ...]
    onsets: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.words)


def read_events(path: str | Path) -> Events:
    """Read a word/onset TSV; onsets must parse as finite, nondecreasing floats."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"events file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InputError(f"events file is empty: {path}")
    header = tuple(lines[0].split("\t"))
    if header != EVENTS_COLUMNS:
        raise InputError(
            f"events header must be {EVENTS_COLUMNS!r}, got {header!r} in {path}"
        )
    words: list[str] = []
    onsets: list[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        word, raw = parts
        if not word:
            raise InputError(f"{path}:{lineno}: empty word")
        try:
            onset = float(raw)
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad onset {raw!r}") from None
        if not np.isfinite(onset):
            raise InputError(f"{path}:{lineno}: onset must be finite, got {raw}")
        if onsets and onset < onsets[-1]:
            raise InputError(f"{path}:{lineno}: onsets must be nondecreasing")
        words.append(word)
        onsets.append(onset)
    if not words:
        raise InputError(f"events file has no rows: {path}")
    return Events(tuple(words), tuple(onsets))


def _atomic_bytes(path: Path, write) -> None:
    # temp file in the target directory so the final rename stays atomic
    tmp = path.parent / f".{path.name}.{uuid.uuid4().hex}.tmp"
    try:
        with open(tmp, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Save a 2-D float32 array; partial files never appear under the final name."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise InputError(f"matrix must be 2-D, got shape {matrix.shape}")
    out = np.ascontiguousarray(matrix, dtype=np.float32)
    _atomic_bytes(Path(path), lambda fh: np.save(fh, out))


def write_manifest(path: str | Path, manifest: dict) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    _atomic_bytes(Path(path), lambda fh: fh.write(text.encode("utf-8")))
