import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docdp import (
    DimensionMismatchError,
    EmbeddingFormatError,
    EmbeddingTable,
    OOVError,
    load_embeddings,
    save_embeddings,
)
from docdp.embeddings import lookup, nearest_word, word_distance

from oracles import random_table, scan_nearest


def _load(text):
    return load_embeddings(io.BytesIO(text.encode("utf-8")))


def test_load_two_rows():
    t = _load("a 0.0 0.0\nb 3.0 4.0\n")
    assert t.dimension == 2
    assert len(t) == 2
    np.testing.assert_array_equal(t.lookup("b"), [3.0, 4.0])


@pytest.mark.parametrize(
    "text, err",
    [
        ("a 0.0\nb 3.0 4.0\n", DimensionMismatchError),
        ("a 0.0\na 1.0\n", EmbeddingFormatError),
        ("a 0.0\nb x\n", EmbeddingFormatError),
        ("", EmbeddingFormatError),
        ("\n\n", EmbeddingFormatError),
        ("a nan\n", EmbeddingFormatError),
        ("a\n", EmbeddingFormatError),
    ],
)
def test_load_rejects_malformed(text, err):
    with pytest.raises(err):
        _load(text)


def test_dimension_mismatch_names_line():
    with pytest.raises(DimensionMismatchError, match="line 2"):
        _load("a 0.0\nb 3.0 4.0\n")


def test_load_from_path_and_trailing_space(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("x 1.5 2 \ny -1e-3 4\n", encoding="utf-8")
    t = load_embeddings(p)
    np.testing.assert_array_equal(t.lookup("x"), [1.5, 2.0])
    np.testing.assert_array_equal(t.lookup("y"), [-0.001, 4.0])


def test_unicode_tokens():
    t = _load("café 1.0\nnaïve 2.0\n")
    assert "café" in t and t.dimension == 1


def test_large_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    words = [f"tok{i}" for i in range(10_000)]
    vecs = rng.normal(size=(10_000, 7))
    p = tmp_path / "big.txt"
    with open(p, "w") as fh:
        for w, v in zip(words, vecs):
            fh.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")
    t = load_embeddings(p)
    assert len(t) == 10_000 and t.dimension == 7
    for i in (0, 17, 9_999):
        np.testing.assert_array_equal(t.lookup(words[i]), vecs[i])


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 6).flatmap(
        lambda k: st.dictionaries(
            st.text(st.characters(blacklist_categories=("Cs", "Zs", "Zl", "Zp", "Cc")), min_size=1, max_size=6),
            st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=k, max_size=k),
            min_size=1,
            max_size=8,
        )
    )
)
def test_save_load_round_trip_bit_exact(entries):
    entries = {w: v for w, v in entries.items() if not any(c.isspace() for c in w)}
    if not entries:
        return
    t = EmbeddingTable(entries)
    buf = io.BytesIO()
    save_embeddings(t, buf)
    buf.seek(0)
    t2 = load_embeddings(buf)
    assert t2.words == t.words
    for w in t.words:
        assert t2.lookup(w).tobytes() == np.asarray(entries[w], dtype=float).tobytes()


def test_lookup_and_oov(table_ab):
    np.testing.assert_array_equal(lookup(table_ab, "b"), [3.0, 4.0])
    with pytest.raises(OOVError) as info:
        lookup(EmbeddingTable({"a": [0.0, 0.0]}), "z")
    assert info.value.token == "z"
    assert "z" in str(info.value)


def test_table_is_immutable(table_ab):
    with pytest.raises(ValueError):
        table_ab.lookup("a")[0] = 1.0


def test_word_distance(table_ab):
    assert word_distance(table_ab, "a", "b") == 5.0
    assert word_distance(table_ab, "b", "a") == 5.0
    assert word_distance(table_ab, "b", "b") == 0.0
    with pytest.raises(OOVError):
        word_distance(table_ab, "a", "q")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_metric_axioms(seed, dim):
    rng = np.random.default_rng(seed)
    t = random_table(rng, 6, dim, scale=10.0)
    ws = t.words
    for a in ws:
        assert t.word_distance(a, a) == 0.0
        for b in ws:
            dab = t.word_distance(a, b)
            assert dab >= 0
            assert dab == pytest.approx(t.word_distance(b, a), abs=1e-9)
            assert dab == pytest.approx(float(np.linalg.norm(t.lookup(a) - t.lookup(b))), abs=1e-9)
            for c in ws:
                assert t.word_distance(a, c) <= dab + t.word_distance(b, c) + 1e-9


def test_nearest_word_examples(table_ab):
    assert nearest_word(table_ab, [0.1, 0.0]) == "a"
    assert nearest_word(table_ab, [3.0, 4.0]) == "b"
    # (1.5, 2) is exactly 2.5 from both words; "a" < "b".
    assert scan_nearest(["a", "b"], [(0, 0), (3, 4)], (1.5, 2.0)) == "a"
    assert nearest_word(table_ab, [1.5, 2.0]) == "a"
    assert table_ab.nearest_words([[1.5, 2.0]], method="gemm") == ["a"]


def test_tie_break_independent_of_insertion_order():
    t = EmbeddingTable({"zz": [1.0], "aa": [-1.0]})
    assert t.nearest_word([0.0]) == "aa"


def test_nearest_dimension_mismatch(table_ab):
    with pytest.raises(DimensionMismatchError):
        table_ab.nearest_word([1.0, 2.0, 3.0])


def test_nearest_of_own_vector_is_self(toy3d):
    assert toy3d.duplicate_vectors() == []
    for w in toy3d.words:
        assert toy3d.nearest_word(toy3d.lookup(w)) == w


def test_duplicate_vectors_flagged_and_snapped_to_smallest():
    t = EmbeddingTable({"b": [1.0, 2.0], "a": [1.0, 2.0], "c": [0.0, 0.0]})
    assert t.duplicate_vectors() == [("a", "b")]
    assert t.nearest_word([1.0, 2.0]) == "a"


@pytest.mark.parametrize("dim, n_words", [(1, 5), (3, 50), (20, 400), (50, 2000)])
def test_batch_search_matches_exhaustive_scan(dim, n_words):
    rng = np.random.default_rng(dim * 1000 + n_words)
    t = random_table(rng, n_words, dim)
    q = rng.normal(size=(300, dim)) * 1.5
    # Queries placed exactly on stored vectors and exact midpoints exercise ties.
    h = min(20, n_words // 2)
    q[:h] = t.matrix[:h]
    q[h : 2 * h] = (t.matrix[:h] + t.matrix[h : 2 * h]) / 2
    scan = t.nearest_indices(q, method="scan")
    gemm = t.nearest_indices(q, method="gemm")
    np.testing.assert_array_equal(scan, gemm)
    single = [t.index(t.nearest_word(v)) for v in q]
    np.testing.assert_array_equal(scan, single)
    if n_words <= 50:
        ref = [scan_nearest(t.words, t.matrix, v) for v in q]
        assert [t.words[i] for i in scan] == ref


def test_rejects_non_finite_and_empty():
    with pytest.raises(EmbeddingFormatError):
        EmbeddingTable({})
    with pytest.raises(EmbeddingFormatError):
        EmbeddingTable({"a": [math.inf]})
    with pytest.raises(DimensionMismatchError):
        EmbeddingTable({"a": [1.0], "b": [1.0, 2.0]})
