"""Reconcile event words with tokenizer output.

Stimulus transcripts carry punctuation that word-level event files drop, and
subword tokenizers split words at places the events never see.  This module
pins down, for every event word, which token positions belong to it:

* ``span`` holds the word's own subword tokens, in order.
* ``punct_span`` holds the punctuation tokens that trail the word, up to the
  next word's first token.  Those tokens modulate the representation of the
  word they close, so pooling wants them attached to it.

A token is *mergeable* into a neighboring word when every character is
closing or final punctuation: Unicode categories Po (period, comma, ...),
Pe (closing brackets), Pf (final quotes), or the undirected ASCII quotes
``'`` and ``"``.  Opening brackets and dashes are not mergeable; a dash
between words that the events do not mention means the transcript and the
events disagree, and silently gluing it to a word would skew that word's
pooled vector.  Anything non-mergeable found between two words is an
alignment failure, reported with character offsets so the transcript can be
inspected at the exact spot.

Matching is tolerant of orthography the tokenizer normalizes anyway: case,
and the common typographic variants of apostrophes, quotes, and hyphens.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

from .errors import AlignmentError, InputError

_MERGE_CATEGORIES = frozenset({"Po", "Pe", "Pf"})
_ASCII_QUOTES = frozenset({"'", '"'})

# typographic variants folded onto one representative for matching
_FOLD = str.maketrans(
    {
        "\u2018": "'",  # left single quote
        "\u2019": "'",  # right single quote / apostrophe
        "\u201c": '"',  # left double quote
        "\u201d": '"',  # right double quote
        "\u2010": "-",  # hyphen
        "\u2011": "-",  # non-breaking hyphen
        "\u2012": "-",  # figure dash
        "\u2013": "-",  # en dash
    }
)


def mergeable(token_text: str) -> bool:
    """True when every character may be pooled into the preceding word."""
    if not token_text:
        return False
    for ch in token_text:
        if ch in _ASCII_QUOTES:
            continue
        if unicodedata.category(ch) not in _MERGE_CATEGORIES:
            return False
    return True


def _fold(s: str) -> str:
    return s.translate(_FOLD).casefold()


@dataclass(frozen=True)
class WordAlignment:
    """Token positions owned by one event word."""

    word: str
    onset: float
    span: tuple[int, int]  # the word's own tokens, half-open
    punct_span: tuple[int, int]  # trailing punctuation tokens, half-open

    @property
    def indices(self) -> range:
        return range(self.span[0], self.punct_span[1])


def _word_char_spans(text: str, words: tuple[str, ...]) -> list[tuple[int, int]]:
    """Locate each word's character span in order, skipping everything else.

    The scan is greedy and linear: from the current cursor, find the first
    position where the folded word matches the folded text.  Event words are
    the transcript's words in order, so the first match is the right one.
    """
    folded_text = _fold(text)
    spans: list[tuple[int, int]] = []
    cursor = 0
    for i, word in enumerate(words):
        needle = _fold(word)
        if not needle:
            raise InputError(f"word {i} is empty")
        start = folded_text.find(needle, cursor)
        if start < 0:
            raise AlignmentError(
                f"word {i} {word!r} not found in text after offset {cursor}"
            )
        spans.append((start, start + len(needle)))
        cursor = start + len(needle)
    return spans


def align_words(
    text: str,
    words: tuple[str, ...],
    onsets: tuple[float, ...],
    offsets: list[tuple[int, int]],
) -> list[WordAlignment]:
    """Assign every token position to exactly one word.

    ``offsets`` is the tokenizer's character span per token, in token order.
    The result tiles ``range(len(offsets))``: spans are contiguous, do not
    overlap, and cover every token.  Tokens between two words must be
    mergeable punctuation and join the earlier word's ``punct_span``;
    mergeable tokens before the first word (an opening quote is not, but a
    stray period would be) pool with the first word.
    """
    if len(words) != len(onsets):
        raise InputError(f"{len(words)} words but {len(onsets)} onsets")
    if not words:
        raise InputError("no words to align")
    if not offsets:
        raise AlignmentError("tokenizer produced no tokens")

    char_spans = _word_char_spans(text, words)

    # a token belongs to the first word whose characters it touches
    owner = [-1] * len(offsets)
    w = 0
    for t, (ts, te) in enumerate(offsets):
        if te <= ts:
            raise AlignmentError(f"token {t} has empty offset span ({ts}, {te})")
        while w < len(char_spans) and char_spans[w][1] <= ts:
            w += 1
        if w < len(char_spans) and ts < char_spans[w][1] and te > char_spans[w][0]:
            owner[t] = w

    own_ranges: list[list[int]] = [[] for _ in words]
    for t, wi in enumerate(owner):
        if wi >= 0:
            own_ranges[wi].append(t)
    for i, toks in enumerate(own_ranges):
        if not toks:
            cs = char_spans[i]
            raise AlignmentError(
                f"word {i} {words[i]!r} at offsets {cs[0]}..{cs[1]} "
                "matched no tokens"
            )
        if toks[-1] - toks[0] + 1 != len(toks):
            raise AlignmentError(
                f"word {i} {words[i]!r} maps to non-contiguous tokens {toks}"
            )

    def _demand_mergeable(t: int, following: int) -> None:
        ts, te = offsets[t]
        piece = text[ts:te]
        if not mergeable(piece):
            raise AlignmentError(
                f"token {piece!r} at offsets {ts}..{te} is neither part of a "
                f"word nor trailing punctuation (between words "
                f"{following - 1} and {following})"
            )

    # leading stray tokens pool with the first word
    first_own = own_ranges[0][0]
    for t in range(first_own):
        _demand_mergeable(t, 0)

    alignments: list[WordAlignment] = []
    for i, toks in enumerate(own_ranges):
        span = (toks[0] if i else 0, toks[-1] + 1)
        if i + 1 < len(own_ranges):
            punct_end = own_ranges[i + 1][0]
        else:
            punct_end = len(offsets)
        for t in range(span[1], punct_end):
            _demand_mergeable(t, i + 1)
        alignments.append(
            WordAlignment(
                word=words[i],
                onset=onsets[i],
                span=span,
                punct_span=(span[1], punct_end),
            )
        )

    assert alignments[0].span[0] == 0
    assert alignments[-1].punct_span[1] == len(offsets)
    return alignments
