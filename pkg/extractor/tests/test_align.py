"""Alignment unit tests drive align_words with hand-written offsets, so the
policy is pinned without any tokenizer in the loop."""

import pytest

from encextract.align import align_words, mergeable
from encextract.errors import AlignmentError, InputError


class TestMergeable:
    @pytest.mark.parametrize(
        "tok", [",", ".", "!", "?", ";", ":", ")", "]", "\u201d", "'", '"', "...", '."', ',"']
    )
    def test_trailing_punctuation_merges(self, tok):
        assert mergeable(tok)

    @pytest.mark.parametrize(
        "tok", ["-", "\u2014", "(", "[", "\u201c", "a", "a.", "", " "]
    )
    def test_everything_else_does_not(self, tok):
        assert not mergeable(tok)


def _spans(alignments):
    return [(al.span, al.punct_span) for al in alignments]


class TestAlignWords:
    def test_quoted_sentence(self):
        text = 'He said, "go on." Then left.'
        offsets = [
            (0, 2),  # He
            (3, 7),  # said
            (7, 8),  # ,
            (9, 10),  # "
            (10, 12),  # go
            (13, 15),  # on
            (15, 16),  # .
            (16, 17),  # "
            (18, 22),  # Then
            (23, 27),  # left
            (27, 28),  # .
        ]
        words = ("He", "said", "go", "on", "Then", "left")
        als = align_words(text, words, tuple(float(i) for i in range(6)), offsets)
        assert _spans(als) == [
            ((0, 1), (1, 1)),
            ((1, 2), (2, 4)),
            ((4, 5), (5, 5)),
            ((5, 6), (6, 8)),
            ((8, 9), (9, 9)),
            ((9, 10), (10, 11)),
        ]
        assert [al.word for al in als] == list(words)
        assert als[1].onset == 1.0

    def test_multi_token_word_owns_inner_punctuation(self):
        text = "don't stop"
        offsets = [(0, 3), (3, 4), (4, 5), (6, 10)]
        als = align_words(text, ("don't", "stop"), (0.0, 1.0), offsets)
        assert _spans(als) == [((0, 3), (3, 3)), ((3, 4), (4, 4))]

    def test_case_and_variant_folding(self):
        # curly apostrophe in the text, ASCII in the events
        text = "DON\u2019T stop"
        offsets = [(0, 3), (3, 4), (4, 5), (6, 10)]
        als = align_words(text, ("don't", "Stop"), (0.0, 1.0), offsets)
        assert _spans(als) == [((0, 3), (3, 3)), ((3, 4), (4, 4))]

    def test_leading_stray_punctuation_pools_with_first_word(self):
        text = ". a b"
        offsets = [(0, 1), (2, 3), (4, 5)]
        als = align_words(text, ("a", "b"), (0.0, 1.0), offsets)
        assert _spans(als) == [((0, 2), (2, 2)), ((2, 3), (3, 3))]
        assert list(als[0].indices) == [0, 1]

    def test_indices_cover_span_and_tail(self):
        text = "a, b"
        offsets = [(0, 1), (1, 2), (3, 4)]
        als = align_words(text, ("a", "b"), (0.0, 1.0), offsets)
        assert list(als[0].indices) == [0, 1]
        assert list(als[1].indices) == [2]

    def test_spans_tile_tokens(self):
        text = "one two, three."
        offsets = [(0, 3), (4, 7), (7, 8), (9, 14), (14, 15)]
        als = align_words(text, ("one", "two", "three"), (0.0, 1.0, 2.0), offsets)
        pos = 0
        for al in als:
            assert al.span[0] == pos
            assert al.span[1] == al.punct_span[0]
            pos = al.punct_span[1]
        assert pos == len(offsets)

    def test_stray_word_token_fails_with_offsets(self):
        text = "a x b"
        offsets = [(0, 1), (2, 3), (4, 5)]
        with pytest.raises(AlignmentError, match=r"'x' at offsets 2\.\.3"):
            align_words(text, ("a", "b"), (0.0, 1.0), offsets)

    def test_stray_dash_fails(self):
        # dashes are not trailing punctuation; events must mention them
        text = "a - b"
        offsets = [(0, 1), (2, 3), (4, 5)]
        with pytest.raises(AlignmentError, match="between words 0 and 1"):
            align_words(text, ("a", "b"), (0.0, 1.0), offsets)

    def test_leading_non_mergeable_fails(self):
        text = "( a"
        offsets = [(0, 1), (2, 3)]
        with pytest.raises(AlignmentError):
            align_words(text, ("a",), (0.0,), offsets)

    def test_word_missing_from_text(self):
        text = "a b"
        offsets = [(0, 1), (2, 3)]
        with pytest.raises(AlignmentError, match="'zebra' not found.*offset"):
            align_words(text, ("a", "zebra"), (0.0, 1.0), offsets)

    def test_word_without_tokens(self):
        # tokens skip the second word's characters entirely
        text = "a b"
        offsets = [(0, 1)]
        with pytest.raises(AlignmentError, match="matched no tokens"):
            align_words(text, ("a", "b"), (0.0, 1.0), offsets)

    def test_no_tokens(self):
        with pytest.raises(AlignmentError, match="no tokens"):
            align_words("a", ("a",), (0.0,), [])

    def test_empty_offset_span(self):
        with pytest.raises(AlignmentError, match="empty offset span"):
            align_words("ab", ("ab",), (0.0,), [(0, 1), (1, 1)])

    def test_no_words(self):
        with pytest.raises(InputError, match="no words"):
            align_words("a", (), (), [(0, 1)])

    def test_length_mismatch(self):
        with pytest.raises(InputError, match="onsets"):
            align_words("a", ("a",), (0.0, 1.0), [(0, 1)])
