import numpy as np
import pytest

from encextract.errors import InputError
from encextract.glove import glove_features


def _vectors_file(tmp_path, rows, dim=300):
    lines = []
    for word, base in rows:
        values = " ".join(f"{base + 0.001 * j:.4f}" for j in range(dim))
        lines.append(f"{word} {values}")
    p = tmp_path / "vectors.txt"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def test_lookup_and_oov(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0), ("the", 2.0), ("keeper", 3.0)])
    m, missing = glove_features(("The", "tide", "zxqj", "keeper"), p)
    assert m.shape == (4, 300)
    assert m.dtype == np.float32
    assert missing == 1
    # "The" resolves through case folding to the stored "the"
    assert m[0, 0] == pytest.approx(2.0)
    assert m[1, 0] == pytest.approx(1.0)
    assert np.array_equal(m[2], np.zeros(300, dtype=np.float32))
    assert m[3, 0] == pytest.approx(3.0)


def test_exact_match_wins_over_folded(tmp_path):
    p = _vectors_file(tmp_path, [("The", 1.0), ("the", 2.0)])
    m, missing = glove_features(("The", "the"), p)
    assert missing == 0
    assert m[0, 0] == pytest.approx(1.0)
    assert m[1, 0] == pytest.approx(2.0)


def test_repeated_words_share_rows(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0)])
    m, missing = glove_features(("tide", "tide"), p)
    assert missing == 0
    assert np.array_equal(m[0], m[1])


def test_all_missing(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0)])
    m, missing = glove_features(("aaa", "bbb"), p)
    assert missing == 2
    assert not m.any()


def test_custom_dim(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0)], dim=5)
    m, missing = glove_features(("tide",), p, dim=5)
    assert m.shape == (1, 5)
    assert missing == 0


def test_wrong_dimension_reported_with_line(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0)], dim=7)
    with pytest.raises(InputError, match=r":1: expected 300 values, got 7"):
        glove_features(("tide",), p)


def test_non_numeric_entry(tmp_path):
    p = tmp_path / "vectors.txt"
    p.write_text("tide " + " ".join(["x"] * 300) + "\n", encoding="utf-8")
    with pytest.raises(InputError, match="non-numeric"):
        glove_features(("tide",), p)


def test_missing_file(tmp_path):
    with pytest.raises(InputError, match="not found"):
        glove_features(("a",), tmp_path / "nope.txt")


def test_no_words(tmp_path):
    p = _vectors_file(tmp_path, [("tide", 1.0)])
    with pytest.raises(InputError, match="no words"):
        glove_features((), p)


def test_unrelated_lines_never_parsed(tmp_path):
    # a malformed vector for a word nobody asked about must not trip the reader
    good = "tide " + " ".join(["1.0"] * 300)
    bad = "junk 1.0 2.0"
    p = tmp_path / "vectors.txt"
    p.write_text(bad + "\n" + good + "\n", encoding="utf-8")
    m, missing = glove_features(("tide",), p)
    assert missing == 0
    assert m[0, 0] == pytest.approx(1.0)
