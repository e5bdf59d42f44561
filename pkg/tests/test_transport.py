import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docdp import (
    BowDocument,
    DimensionMismatchError,
    EmbeddingTable,
    EmptyDocumentError,
    EnumerationBoundError,
    OOVError,
    brute_force_min_permutation,
    cost_matrix,
    transport_simplex,
    wmd,
    wmd_assignment,
    wmd_result,
)
from docdp.transport import solve_assignment

from oracles import linprog_wmd, random_table


def random_docs(rng, table, a, b):
    words = table.words
    d1 = BowDocument(rng.choice(words, size=a))
    d2 = BowDocument(rng.choice(words, size=b))
    return d1, d2


class TestBowDocument:
    def test_canonical_order_and_length(self):
        d = BowDocument(["b", "a", "b"])
        assert d.tokens == ("a", "b", "b")
        assert d.length == 3
        assert d == BowDocument(["b", "b", "a"])
        assert hash(d) == hash(BowDocument(("a", "b", "b")))
        assert d.counts() == {"a": 1, "b": 2}

    def test_from_counts(self):
        assert BowDocument.from_counts({"x": 2, "y": 1}).tokens == ("x", "x", "y")

    def test_rejects_empty(self):
        with pytest.raises(EmptyDocumentError):
            BowDocument([])
        with pytest.raises(ValueError):
            BowDocument(["a", ""])


class TestCostMatrix:
    def test_single_pair(self, table_ab):
        np.testing.assert_array_equal(cost_matrix(table_ab, ["a"], ["b"]).entries, [[5.0]])

    def test_identical_documents_zero_diagonal(self, table_ab):
        c = cost_matrix(table_ab, ["b", "a"], ["a", "b"])
        assert c.row_tokens == ("a", "b")
        np.testing.assert_array_equal(c.entries, [[0.0, 5.0], [5.0, 0.0]])

    def test_entries_match_word_distance(self, rng):
        t = random_table(rng, 12, 4)
        d1, d2 = random_docs(rng, t, 5, 7)
        c = cost_matrix(t, d1, d2)
        for (i, u), (j, v) in itertools.product(enumerate(d1.tokens), enumerate(d2.tokens)):
            assert c.entries[i, j] == pytest.approx(t.word_distance(u, v), abs=1e-12)
        assert (c.entries >= 0).all()

    def test_oov_names_document_and_position(self, table_ab):
        with pytest.raises(OOVError, match="second document, position 1"):
            cost_matrix(table_ab, ["a"], ["a", "zz"])


class TestWMD:
    def test_identity(self, table_ab):
        assert wmd(table_ab, ["a", "b"], ["b", "a"]) == 0.0
        assert wmd(table_ab, ["a", "b", "b"], ["a", "b", "b"], method="simplex") == 0.0

    def test_forced_flow(self, table_ab):
        # One source word of mass 1 must send 1/2 to each target word:
        # cost = 1/2 * 0 + 1/2 * 5.
        res = wmd_result(table_ab, ["a"], ["a", "b"])
        assert res.distance == pytest.approx(2.5, abs=1e-12)
        np.testing.assert_allclose(res.flow.entries, [[0.5, 0.5]])
        assert wmd(table_ab, ["a", "b"], ["a"]) == pytest.approx(2.5, abs=1e-12)

    def test_empty_document_rejected(self, table_ab):
        with pytest.raises(EmptyDocumentError):
            wmd(table_ab, [], ["a"])

    def test_unequal_lengths_match_linprog(self, rng):
        t = random_table(rng, 15, 5)
        for a, b in [(1, 4), (3, 5), (7, 2), (6, 9), (10, 10)]:
            d1, d2 = random_docs(rng, t, a, b)
            res = wmd_result(t, d1, d2, method="simplex")
            ref, _ = linprog_wmd(res.cost.entries)
            assert res.distance == pytest.approx(ref, abs=1e-9)
            np.testing.assert_allclose(res.flow.entries.sum(axis=1), 1 / a, atol=1e-9)
            np.testing.assert_allclose(res.flow.entries.sum(axis=0), 1 / b, atol=1e-9)
            assert sum(res.flow.exact[0]) == Fraction(1, a)

    def test_equal_length_flow_is_scaled_permutation(self, rng):
        t = random_table(rng, 10, 3)
        for n in range(1, 8):
            d1, d2 = random_docs(rng, t, n, n)
            res = wmd_result(t, d1, d2, method="simplex")
            scaled = res.flow.entries * n
            np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-12)
            np.testing.assert_allclose(scaled.sum(axis=0), 1)
            np.testing.assert_allclose(scaled.sum(axis=1), 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_symmetry_and_order_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        t = random_table(rng, 8, 3)
        d1, d2 = random_docs(rng, t, a, b)
        v = wmd(t, d1, d2)
        assert v >= 0
        assert v == pytest.approx(wmd(t, d2, d1), abs=1e-9)
        shuffled = list(d1.tokens)
        rng.shuffle(shuffled)
        assert wmd(t, shuffled, d2) == pytest.approx(v, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_triangle_inequality_equal_length(self, seed, n):
        rng = np.random.default_rng(seed)
        t = random_table(rng, 7, 2)
        docs = [BowDocument(rng.choice(t.words, size=n)) for _ in range(3)]
        x, y, z = docs
        assert wmd(t, x, z) <= wmd(t, x, y) + wmd(t, y, z) + 1e-9

    def test_three_word_whole_word_example(self):
        # Three words each side; costs arranged so the optimal whole-word flow
        # is 1->2, 2->1, 3->3 as in the illustrated flow matrix.
        t = EmbeddingTable(
            {
                "obama": [0.0, 0.0],
                "speaks": [5.0, 0.0],
                "illinois": [10.0, 0.0],
                "president": [0.2, 0.1],
                "greets": [5.1, 0.3],
                "press": [9.8, 0.2],
            }
        )
        d1, d2 = ["obama", "speaks", "illinois"], ["president", "greets", "press"]
        res = wmd_result(t, d1, d2, method="simplex")
        scaled = res.flow.entries * 3
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-12)
        # Rows/cols are in sorted order: illinois, obama, speaks / greets, president, press.
        np.testing.assert_allclose(scaled, [[0, 0, 1], [0, 1, 0], [1, 0, 0]])


class TestAssignment:
    def test_identity_zero(self, toy3d):
        m = wmd_assignment(toy3d, ["cat", "sat", "mat"], ["mat", "cat", "sat"])
        assert m.total_cost == 0.0

    def test_unequal_rejected(self, table_ab):
        with pytest.raises(DimensionMismatchError):
            wmd_assignment(table_ab, ["a"], ["a", "b"])
        with pytest.raises(DimensionMismatchError):
            wmd(table_ab, ["a"], ["a", "b"], method="assignment")

    def test_matches_brute_force_n5(self, rng):
        t = random_table(rng, 10, 3)
        for _ in range(30):
            d1, d2 = random_docs(rng, t, 5, 5)
            m = wmd_assignment(t, d1, d2)
            bf = brute_force_min_permutation(cost_matrix(t, d1, d2))
            assert m.total_cost == pytest.approx(bf.total_cost, abs=1e-9)
            assert m.total_cost / 5 == pytest.approx(wmd(t, d1, d2, method="simplex"), abs=1e-9)

    def test_mass_scaling_keeps_matching(self, rng):
        # Masses 1/n versus 1: optimum scales by n, support unchanged.
        for _ in range(20):
            C = rng.random((3, 3))
            small = transport_simplex([Fraction(1, 3)] * 3, [Fraction(1, 3)] * 3, C)
            big = transport_simplex([1] * 3, [1] * 3, C)
            assert big.objective == pytest.approx(3 * small.objective, abs=1e-9)
            assert big.flow.support() == small.flow.support()

    def test_solve_assignment_integer_ties(self):
        C = np.ones((4, 4))
        m = solve_assignment(C)
        assert m.total_cost == 4.0
        assert sorted(m.mapping) == [0, 1, 2, 3]


class TestBruteForce:
    def test_examples(self):
        m = brute_force_min_permutation([[0, 5], [5, 0]])
        assert m.mapping == (0, 1) and m.total_cost == 0
        m = brute_force_min_permutation([[1, 2], [3, 1]])
        assert m.mapping == (0, 1) and m.total_cost == 2

    def test_tie_break_lexicographic(self):
        assert brute_force_min_permutation(np.ones((3, 3))).mapping == (0, 1, 2)
        assert brute_force_min_permutation([[1, 0], [0, 1]]).mapping == (1, 0)

    def test_bounds(self):
        with pytest.raises(EnumerationBoundError):
            brute_force_min_permutation(np.zeros((10, 10)))
        with pytest.raises(DimensionMismatchError):
            brute_force_min_permutation(np.zeros((2, 3)))

    def test_agrees_with_assignment_6x6(self, rng):
        for _ in range(20):
            C = rng.random((6, 6)) * 100
            assert solve_assignment(C).total_cost == pytest.approx(
                brute_force_min_permutation(C).total_cost, abs=1e-9
            )


class TestTransportSimplex:
    def test_unbalanced_rejected(self):
        with pytest.raises(ValueError, match="unbalanced"):
            transport_simplex([1, 1], [1], [[0.0], [1.0]])

    def test_degenerate_instances(self, rng):
        for _ in range(200):
            m, n = rng.integers(1, 7, size=2)
            C = rng.integers(0, 3, (m, n)).astype(float)
            s = rng.integers(0, 4, m)
            s[0] += 1
            cuts = np.sort(rng.integers(0, s.sum() + 1, n - 1))
            d = np.diff(np.concatenate([[0], cuts, [s.sum()]]))
            sol = transport_simplex(s, d, C)
            ref, _ = linprog_wmd(C, s, d)
            assert sol.objective == pytest.approx(ref, abs=1e-9)
            assert len(sol.basis) == m + n - 1
            np.testing.assert_array_equal(sol.flow.entries.sum(axis=1), s)
            np.testing.assert_array_equal(sol.flow.entries.sum(axis=0), d)

    def test_float_masses_rationalised(self):
        sol = transport_simplex([1 / 3] * 3, [0.5, 0.5], np.zeros((3, 2)))
        assert sum(sol.flow.exact[i][j] for i in range(3) for j in range(2)) == 1
