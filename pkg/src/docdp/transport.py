"""Word Mover's Distance between bag-of-words documents.

The general case is a transportation problem solved with the transportation
simplex (MODI potentials, stepping-stone pivots). Masses are kept as exact
rationals so basic solutions are exact and degeneracy is detected without
tolerances; only the costs are floating point.

When both documents have the same length the optimum is attained by moving
whole words, so an O(n^3) assignment solver gives the same value faster.
:func:`brute_force_min_permutation` enumerates every permutation and is kept
as an independent check on both solvers.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingTable, _sqdist
from .errors import DimensionMismatchError, EmptyDocumentError, EnumerationBoundError, OOVError

OPTIMALITY_TOL = 1e-9
MAX_BRUTE_FORCE_N = 9


@dataclass(frozen=True)
class BowDocument:
    """Unordered multiset of tokens.

    ``tokens`` is stored sorted, so two documents with the same words and
    multiplicities compare (and hash) equal regardless of input order. The
    sorted order is also the canonical row/column order of cost matrices.
    """

    tokens: tuple[str, ...]

    def __init__(self, tokens: Iterable[str]):
        toks = tuple(sorted(tokens))
        if not toks:
            raise EmptyDocumentError("document has no words")
        for t in toks:
            if not isinstance(t, str) or not t:
                raise ValueError(f"invalid token {t!r}")
        object.__setattr__(self, "tokens", toks)

    @classmethod
    def from_counts(cls, counts: dict[str, int]) -> "BowDocument":
        for w, c in counts.items():
            if int(c) != c or c < 0:
                raise ValueError(f"multiplicity of {w!r} must be a non-negative integer")
        return cls(w for w, c in counts.items() for _ in range(int(c)))

    @property
    def length(self) -> int:
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def counts(self) -> Counter:
        return Counter(self.tokens)

    def __str__(self):
        return " ".join(self.tokens)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise Euclidean costs; rows follow ``source.tokens``, columns ``target.tokens``."""

    entries: np.ndarray
    row_tokens: tuple[str, ...] = ()
    col_tokens: tuple[str, ...] = ()

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class FlowMatrix:
    entries: np.ndarray
    exact: tuple[tuple[Fraction, ...], ...] | None = field(default=None, repr=False)

    def support(self) -> frozenset[tuple[int, int]]:
        """Cells carrying strictly positive flow."""
        if self.exact is not None:
            return frozenset((i, j) for i, row in enumerate(self.exact) for j, x in enumerate(row) if x > 0)
        return frozenset(zip(*map(tuple, np.nonzero(self.entries > 0))))


@dataclass(frozen=True)
class PermutationMatching:
    """Whole-word matching: source word ``i`` moves entirely to target word ``mapping[i]``."""

    mapping: tuple[int, ...]
    total_cost: float

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError(f"mapping {self.mapping} is not a permutation")

    def matrix(self) -> np.ndarray:
        n = len(self.mapping)
        p = np.zeros((n, n))
        p[np.arange(n), self.mapping] = 1.0
        return p


@dataclass(frozen=True)
class TransportSolution:
    objective: float
    flow: FlowMatrix
    basis: frozenset[tuple[int, int]]
    iterations: int


@dataclass(frozen=True)
class WMDResult:
    distance: float
    flow: FlowMatrix
    cost: CostMatrix
    method: str


def _as_document(d) -> BowDocument:
    return d if isinstance(d, BowDocument) else BowDocument(d)


def _vectors(table: EmbeddingTable, doc: BowDocument, label: str) -> np.ndarray:
    idx = []
    for pos, w in enumerate(doc.tokens):
        if w not in table:
            raise OOVError(w, f"{label}, position {pos}")
        idx.append(table.index(w))
    return table.matrix[idx]


def cost_matrix(table: EmbeddingTable, d1, d2) -> CostMatrix:
    """Euclidean cost between every word instance of ``d1`` and of ``d2``.

    Repeated words are expanded into separate rows/columns in sorted token
    order, so each instance carries mass ``1/len`` in the transport problem.
    """
    d1, d2 = _as_document(d1), _as_document(d2)
    x = _vectors(table, d1, "first document")
    y = _vectors(table, d2, "second document")
    c = np.sqrt(_sqdist(x[:, None, :], y[None, :, :]))
    c.setflags(write=False)
    return CostMatrix(c, d1.tokens, d2.tokens)


def _to_fraction(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("masses must be finite")
    # Recovers simple rationals such as 1/3 from their float approximation.
    return Fraction(x).limit_denominator(10**12)


def transport_simplex(supply: Sequence, demand: Sequence, cost) -> TransportSolution:
    """Minimise ``sum(T * cost)`` subject to row sums ``supply`` and column sums ``demand``.

    Masses may be ints, Fractions or floats (floats are rationalised with
    ``Fraction.limit_denominator``); totals must balance exactly after
    conversion. Entering cells are chosen by most negative reduced cost, with
    a switch to Bland's smallest-index rule after a run of degenerate pivots
    so the method cannot cycle.
    """
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2:
        raise DimensionMismatchError("cost must be a 2-D matrix")
    m, n = C.shape
    s = [_to_fraction(x) for x in supply]
    d = [_to_fraction(x) for x in demand]
    if len(s) != m or len(d) != n:
        raise DimensionMismatchError(f"cost is {m}x{n} but masses have lengths {len(s)}, {len(d)}")
    if m == 0 or n == 0:
        raise EmptyDocumentError("transport problem has no sources or sinks")
    if any(x < 0 for x in s + d):
        raise ValueError("masses must be non-negative")
    if sum(s) != sum(d):
        raise ValueError(f"unbalanced problem: supply {sum(s)} != demand {sum(d)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("costs must be finite")

    flow, basis = _northwest_corner(s, d)
    tol = OPTIMALITY_TOL * 1e-3 * max(1.0, float(np.abs(C).max()))
    degenerate_run = 0
    bland = False
    iterations = 0
    while True:
        u, v = _potentials(C, basis, m, n)
        reduced = C - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        if bland:
            negative = np.argwhere(reduced < -tol)
            if len(negative) == 0:
                break
            enter = tuple(int(t) for t in negative[0])
        else:
            k = int(np.argmin(reduced))
            if reduced.flat[k] >= -tol:
                break
            enter = divmod(k, n)
        cycle = _cycle(basis, enter, m)
        minus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        leaving_candidates = [c for c in minus if flow[c] == theta]
        leave = min(leaving_candidates) if bland else leaving_candidates[0]
        for pos, c in enumerate(cycle):
            if pos % 2 == 0:
                flow[c] = flow.get(c, Fraction(0)) + theta
            else:
                flow[c] -= theta
        basis.remove(leave)
        flow.pop(leave)
        basis.add(enter)
        iterations += 1
        if theta == 0:
            degenerate_run += 1
            if degenerate_run > 2 * (m + n):
                bland = True
        else:
            degenerate_run = 0

    exact = tuple(tuple(flow.get((i, j), Fraction(0)) for j in range(n)) for i in range(m))
    dense = np.array([[float(x) for x in row] for row in exact])
    objective = float(sum(float(x) * C[c] for c, x in flow.items() if x))
    return TransportSolution(objective, FlowMatrix(dense, exact), frozenset(basis), iterations)


def _northwest_corner(s, d):
    s, d = list(s), list(d)
    m, n = len(s), len(d)
    flow: dict[tuple[int, int], Fraction] = {}
    basis: set[tuple[int, int]] = set()
    i = j = 0
    # The staircase path visits m + n - 1 cells, giving a spanning-tree basis
    # even when some of them carry zero flow.
    while True:
        x = min(s[i], d[j])
        flow[i, j] = x
        basis.add((i, j))
        s[i] -= x
        d[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if (s[i] == 0 and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(C, basis, m, n):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    rows: dict[int, list[int]] = {}
    cols: dict[int, list[int]] = {}
    for i, j in basis:
        rows.setdefault(i, []).append(j)
        cols.setdefault(j, []).append(i)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in rows.get(k, ()):
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols.get(k, ()):
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    queue.append(("r", i))
    if np.isnan(u).any() or np.isnan(v).any():
        raise RuntimeError("basis is not a spanning tree")
    return u, v


def _cycle(basis, enter, m):
    """Cells of the unique cycle formed by adding ``enter`` to the basis tree.

    Returned in order starting at ``enter``; even positions gain flow, odd
    positions lose it.
    """
    # Bipartite graph: row nodes 0..m-1, column nodes m..m+n-1.
    adj: dict[int, list[int]] = {}
    for i, j in basis:
        adj.setdefault(i, []).append(m + j)
        adj.setdefault(m + j, []).append(i)
    start, goal = m + enter[1], enter[0]
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    # Walk from the entering row back to the entering column through the tree.
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    cells = [enter]
    for a, b in zip(path, path[1:]):
        cells.append((a, b - m) if a < m else (b, a - m))
    return cells


def solve_assignment(C) -> PermutationMatching:
    """Minimum-cost perfect matching on a square cost matrix.

    Shortest augmenting paths with row/column potentials (the Hungarian
    method in its O(n^3) form).
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatchError(f"assignment needs a square matrix, got shape {C.shape}")
    n = C.shape[0]
    if n == 0:
        raise EmptyDocumentError("empty cost matrix")
    inf = math.inf
    # 1-based with a virtual column 0, as in the classical formulation.
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = -1
            row = C[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    mapping = [0] * n
    for j in range(1, n + 1):
        mapping[match[j] - 1] = j - 1
    total = float(sum(C[i, mapping[i]] for i in range(n)))
    return PermutationMatching(tuple(mapping), total)


def brute_force_min_permutation(C) -> PermutationMatching:
    """Exact minimum over all n! permutations (n <= 9).

    Permutations are scanned in lexicographic order and only a strictly
    smaller cost replaces the incumbent, so ties resolve to the
    lexicographically smallest permutation.
    """
    C = np.asarray(getattr(C, "entries", C), dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {C.shape}")
    n = C.shape[0]
    if n == 0:
        raise EmptyDocumentError("empty cost matrix")
    if n > MAX_BRUTE_FORCE_N:
        raise EnumerationBoundError(f"n={n} exceeds the brute-force limit of {MAX_BRUTE_FORCE_N}")
    best_perm, best = None, math.inf
    rows = range(n)
    for perm in itertools.permutations(range(n)):
        total = 0.0
        for i in rows:
            total += C[i, perm[i]]
        if total < best:
            best, best_perm = total, perm
    return PermutationMatching(tuple(best_perm), float(best))


def wmd_result(table: EmbeddingTable, d1, d2, method: str = "auto") -> WMDResult:
    """Word Mover's Distance together with an optimal flow and the cost matrix.

    ``method`` is ``"simplex"``, ``"assignment"`` (equal lengths only) or
    ``"auto"``, which picks the assignment solver whenever the lengths match.
    """
    d1, d2 = _as_document(d1), _as_document(d2)
    cm = cost_matrix(table, d1, d2)
    a, b = d1.length, d2.length
    if method == "auto":
        method = "assignment" if a == b else "simplex"
    if method == "assignment":
        if a != b:
            raise DimensionMismatchError(f"assignment requires equal lengths, got {a} and {b}")
        match = solve_assignment(cm.entries)
        share = Fraction(1, a)
        exact = tuple(
            tuple(share if match.mapping[i] == j else Fraction(0) for j in range(a)) for i in range(a)
        )
        flow = FlowMatrix(match.matrix() / a, exact)
        return WMDResult(match.total_cost / a, flow, cm, method)
    if method == "simplex":
        # Integer masses b per row and a per column; dividing by a*b gives 1/a and 1/b.
        sol = transport_simplex([b] * a, [a] * b, cm.entries)
        scale = Fraction(1, a * b)
        exact = tuple(tuple(x * scale for x in row) for row in sol.flow.exact)
        dense = np.array([[float(x) for x in row] for row in exact])
        return WMDResult(sol.objective / (a * b), FlowMatrix(dense, exact), cm, method)
    raise ValueError(f"unknown method {method!r}")


def wmd(table: EmbeddingTable, d1, d2, method: str = "auto") -> float:
    """Word Mover's Distance between two documents (each word instance has mass 1/length)."""
    return wmd_result(table, d1, d2, method).distance


def wmd_assignment(table: EmbeddingTable, d1, d2) -> PermutationMatching:
    """Minimum-cost whole-word matching between equal-length documents.

    ``total_cost / n`` equals :func:`wmd`.
    """
    d1, d2 = _as_document(d1), _as_document(d2)
    if d1.length != d2.length:
        raise DimensionMismatchError(f"documents have lengths {d1.length} and {d2.length}")
    return solve_assignment(cost_matrix(table, d1, d2).entries)
