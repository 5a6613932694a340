"""Shared fixtures: a toy stimulus and two tiny local checkpoints.

The checkpoints are real GPT-2 graphs with a BPE tokenizer trained on the
toy text itself, small enough that a hundred words overflow the context
window and most words split into several tokens.  Everything is seeded, so
separate test runs build byte-identical models.
"""

from pathlib import Path

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers, trainers
from transformers import GPT2Config, GPT2Model, PreTrainedTokenizerFast

from encextract.io import Events

TOY_TEXT = (
    "The tide came in before dawn, and the harbor's one bell rang twice. "
    "Nobody stirred. A gull crossed the well-worn pier, dropped a shell, and "
    'waited; the shell did not open. "Patience," the keeper said, "is a kind '
    'of work." He meant it: slow hours, cold hands, the same gray water. '
    "Didn't the town sleep through storms worse than this? It did, and it "
    "would again. By noon the light turned almost kind. The keeper counted "
    "boats twice, wrote the number in chalk, and smiled at the small, "
    "stubborn arithmetic of an ordinary day. Tomorrow the tide would come "
    "again, he thought, and that was enough."
)

_EDGE_PUNCT = "'\".,;:!?()"


def words_of(text: str) -> list[str]:
    return [w for w in (piece.strip(_EDGE_PUNCT) for piece in text.split()) if w]


def events_of(text: str, spacing: float = 0.75) -> Events:
    words = words_of(text)
    return Events(tuple(words), tuple(i * spacing for i in range(len(words))))


def build_checkpoint(
    out_dir: Path,
    text: str,
    vocab_size: int,
    seed: int,
    **config_overrides,
) -> str:
    tok = Tokenizer(models.BPE(unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    trainer = trainers.BpeTrainer(
        vocab_size=vocab_size, special_tokens=["[UNK]"], show_progress=False
    )
    tok.train_from_iterator([text], trainer)
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, model_max_length=10**6, unk_token="[UNK]"
    )
    config = GPT2Config(
        vocab_size=fast.vocab_size + 4,
        n_positions=16,
        n_embd=16,
        n_layer=2,
        n_head=2,
        bos_token_id=0,
        eos_token_id=0,
    )
    for key, value in config_overrides.items():
        setattr(config, key, value)
    torch.manual_seed(seed)
    model = GPT2Model(config)
    model.eval()
    model.save_pretrained(out_dir)
    fast.save_pretrained(out_dir)
    return str(out_dir)


@pytest.fixture(scope="session")
def toy_text() -> str:
    return TOY_TEXT


@pytest.fixture(scope="session")
def toy_events() -> Events:
    return events_of(TOY_TEXT)


@pytest.fixture(scope="session")
def model_a_dir(tmp_path_factory) -> str:
    return build_checkpoint(
        tmp_path_factory.mktemp("model_a"), TOY_TEXT, vocab_size=80, seed=1234
    )


@pytest.fixture(scope="session")
def model_b_dir(tmp_path_factory) -> str:
    return build_checkpoint(
        tmp_path_factory.mktemp("model_b"),
        TOY_TEXT,
        vocab_size=110,
        seed=99,
        n_positions=32,
        n_embd=12,
        n_layer=1,
    )
