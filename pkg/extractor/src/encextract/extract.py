"""Per-word, per-layer activations from a causal language model.

The stimulus text is tokenized once, pushed through the model, and the
hidden states are pooled per event word (the word's subword tokens plus any
trailing punctuation, see ``align``).  Layer 0 is the embedding output, so a
model with L transformer blocks yields L + 1 matrices of shape
``(n_words, hidden_size)``.

Texts longer than the model's context are handled with half-overlapping
windows: window k starts at ``k * (W // 2)``.  Each token is scored by the
window that gives it the most left context, which works out to a clean
tiling, the first window keeps its whole span and every later window keeps
only its second half.  Pooling accumulates in float64 and stores float32.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .align import WordAlignment, align_words
from .errors import InputError
from .io import Events, write_manifest, write_matrix

SCHEMA_VERSION = 1


def load_model(model_id: str):
    """Load tokenizer and model; the model comes back in eval mode."""
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except (OSError, ValueError, EnvironmentError) as exc:
        raise InputError(f"cannot load model {model_id!r}: {exc}") from None
    model.eval()
    return tokenizer, model


def context_length(model) -> int:
    for attr in ("n_positions", "max_position_embeddings"):
        value = getattr(model.config, attr, None)
        if isinstance(value, int) and value > 1:
            return value
    raise InputError(
        f"model config {type(model.config).__name__} does not state a context length"
    )


def window_plan(n_tokens: int, window: int) -> list[tuple[int, int, int]]:
    """Triples ``(start, resp_start, resp_end)`` whose resp ranges tile tokens.

    ``resp`` marks the tokens the window is responsible for.  The first
    window owns everything it sees; each later window owns only the part
    past the previous window's span, which guarantees every owned token has
    at least ``ceil(window / 2)`` tokens of context.
    """
    if window < 2:
        raise InputError(f"window must be at least 2, got {window}")
    if n_tokens < 1:
        raise InputError("no tokens to window")
    if n_tokens <= window:
        return [(0, 0, n_tokens)]
    stride = window // 2
    plan = [(0, 0, window)]
    while plan[-1][2] < n_tokens:
        start = plan[-1][0] + stride
        plan.append((start, plan[-1][2], min(start + window, n_tokens)))
    return plan


def model_hidden_states(model, input_ids: list[int], window: int) -> np.ndarray:
    """All hidden states for a token sequence, windowed if necessary.

    Returns ``(n_layers + 1, n_tokens, hidden_size)`` float32, embedding
    output first.
    """
    ids = torch.tensor([input_ids], dtype=torch.long)
    out: np.ndarray | None = None
    with torch.no_grad():
        for start, resp_start, resp_end in window_plan(len(input_ids), window):
            result = model(
                ids[:, start : start + window], output_hidden_states=True
            )
            states = result.hidden_states
            if out is None:
                out = np.empty(
                    (len(states), len(input_ids), states[0].shape[-1]),
                    dtype=np.float32,
                )
            for layer, h in enumerate(states):
                out[layer, resp_start:resp_end] = h[
                    0, resp_start - start : resp_end - start
                ].numpy()
    assert out is not None
    return out


def pool_words(
    states: np.ndarray, alignments: list[WordAlignment]
) -> list[np.ndarray]:
    """Mean-pool token states into per-word rows, one matrix per layer."""
    n_layers, _, width = states.shape
    layers = []
    for layer in range(n_layers):
        rows = np.empty((len(alignments), width), dtype=np.float32)
        for row, al in enumerate(alignments):
            chunk = states[layer, al.span[0] : al.punct_span[1]]
            rows[row] = chunk.astype(np.float64).mean(axis=0).astype(np.float32)
        layers.append(rows)
    return layers


def revision_digest(model_id: str, model) -> str:
    """Stable identity for the weights: content hash for local checkpoints."""
    root = Path(model_id)
    if root.is_dir():
        digest = hashlib.sha256()
        for f in sorted(root.rglob("*")):
            if f.is_file():
                digest.update(f.relative_to(root).as_posix().encode("utf-8"))
                digest.update(f.read_bytes())
        return digest.hexdigest()[:16]
    return getattr(model.config, "_commit_hash", None) or "unknown"


def extract(
    model_id: str, text: str, events: Events, window: int | None = None
) -> tuple[list[np.ndarray], list[WordAlignment], dict]:
    """Per-layer word matrices for one stimulus.

    Returns ``(layers, alignments, manifest)`` where ``layers`` has
    ``n_layers + 1`` float32 matrices of shape ``(len(events), hidden_size)``
    and ``manifest`` records the model identity and window policy.
    """
    tokenizer, model = load_model(model_id)
    limit = context_length(model)
    if window is None:
        window = limit
    elif not 2 <= window <= limit:
        raise InputError(f"window must be in [2, {limit}], got {window}")

    encoding = tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
    input_ids = list(encoding["input_ids"])
    offsets = [tuple(pair) for pair in encoding["offset_mapping"]]
    if not input_ids:
        raise InputError("text tokenized to nothing")

    alignments = align_words(text, events.words, events.onsets, offsets)
    states = model_hidden_states(model, input_ids, window)
    layers = pool_words(states, alignments)

    manifest = {
        "kind": "extraction",
        "schema": SCHEMA_VERSION,
        "model": str(model_id),
        "revision": revision_digest(model_id, model),
        "n_layers": len(layers) - 1,
        "hidden_size": int(states.shape[2]),
        "n_words": len(alignments),
        "n_tokens": len(input_ids),
        "dtype": "float32",
        "pooling": "word tokens plus trailing punctuation, float64 mean",
        "window": {
            "length": int(window),
            "stride": int(window // 2),
            "n_windows": len(window_plan(len(input_ids), window)),
            "policy": "half-overlap; each token scored with maximal left context",
        },
    }
    return layers, alignments, manifest


def layer_filename(layer: int) -> str:
    return f"layer_{layer:02d}.npy"


def write_features(out_dir: str | Path, layers: list[np.ndarray], manifest: dict) -> None:
    """Write ``layer_XX.npy`` matrices plus ``extraction.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, matrix in enumerate(layers):
        write_matrix(out / layer_filename(i), matrix)
    write_manifest(out / "extraction.json", manifest)
