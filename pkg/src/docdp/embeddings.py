"""Word embedding lookup table with Euclidean geometry and nearest-word snapping.

Text format: UTF-8, one entry per line, ``<token> <f1> ... <fk>`` separated by
single spaces, no header. This is the layout of the usual pre-trained
embedding downloads (GloVe, fastText ``.vec`` without the header line).
"""

from __future__ import annotations

import io
import math
import os
from typing import BinaryIO, Iterable, Mapping, Union

import numpy as np

from .errors import DimensionMismatchError, EmbeddingFormatError, OOVError

PathOrStream = Union[str, os.PathLike, BinaryIO]

# Maximum number of float64 elements materialised per chunk of a brute-force scan.
_SCAN_CHUNK_ELEMENTS = 4_000_000


def _sqdist(rows: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Every exact distance in the package goes through here so that
    # alternative search paths produce bit-identical values.
    diff = rows - v
    return (diff * diff).sum(axis=-1)


class EmbeddingTable:
    """Immutable map from word to a k-dimensional float64 vector.

    Words are kept in lexicographic order; row ``i`` of :attr:`matrix` holds
    the vector of ``words[i]``. Nearest-word ties resolve to the smallest
    token, which falls out of ``argmin`` returning the first minimum.
    """

    def __init__(self, entries: Mapping[str, Iterable[float]]):
        if not entries:
            raise EmbeddingFormatError("embedding table is empty")
        words = sorted(entries)
        for w in words:
            if not isinstance(w, str) or not w or any(c.isspace() for c in w):
                raise EmbeddingFormatError(f"invalid token {w!r}")
        rows = [np.asarray(entries[w], dtype=np.float64) for w in words]
        dim = rows[0].shape[0] if rows[0].ndim == 1 else 0
        if dim < 1:
            raise EmbeddingFormatError("vectors must be non-empty 1-D sequences")
        for w, r in zip(words, rows):
            if r.shape != (dim,):
                raise DimensionMismatchError(
                    f"word {w!r} has {r.size} components, expected {dim}"
                )
        matrix = np.vstack(rows)
        if not np.all(np.isfinite(matrix)):
            bad = words[int(np.argmax(~np.isfinite(matrix).all(axis=1)))]
            raise EmbeddingFormatError(f"non-finite component in vector for {bad!r}")
        matrix.setflags(write=False)
        self._words = tuple(words)
        self._index = {w: i for i, w in enumerate(words)}
        self._matrix = matrix
        self._sqnorms = np.einsum("ij,ij->i", matrix, matrix)

    @property
    def dimension(self) -> int:
        return self._matrix.shape[1]

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def __len__(self):
        return len(self._words)

    def __contains__(self, word):
        return word in self._index

    def __iter__(self):
        return iter(self._words)

    def __repr__(self):
        return f"EmbeddingTable(words={len(self)}, dimension={self.dimension})"

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise OOVError(word) from None

    def lookup(self, word: str) -> np.ndarray:
        """Return the stored (read-only) vector for ``word``; raises :class:`OOVError`."""
        return self._matrix[self.index(word)]

    def word_distance(self, w1: str, w2: str) -> float:
        """Euclidean distance between the vectors of two vocabulary words."""
        a, b = self.index(w1), self.index(w2)
        if a == b:
            return 0.0
        return math.sqrt(float(_sqdist(self._matrix[a], self._matrix[b])))

    def duplicate_vectors(self) -> list[tuple[str, ...]]:
        """Groups of distinct words that share an identical vector.

        Duplicates are legal, but the snap step can only ever return the
        lexicographically smallest word of each group.
        """
        groups: dict[bytes, list[str]] = {}
        for w, row in zip(self._words, self._matrix):
            groups.setdefault(row.tobytes(), []).append(w)
        return [tuple(g) for g in groups.values() if len(g) > 1]

    def _check_query(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1:] != (self.dimension,):
            raise DimensionMismatchError(
                f"query has dimension {v.shape[-1] if v.ndim else 0}, table has {self.dimension}"
            )
        return v

    def nearest_word(self, v) -> str:
        """Word whose vector is closest to ``v``; ties go to the smallest token."""
        v = self._check_query(v)
        if v.ndim != 1:
            raise DimensionMismatchError("nearest_word expects a single vector")
        return self._words[int(np.argmin(_sqdist(self._matrix, v)))]

    def nearest_indices(self, queries, method: str = "auto") -> np.ndarray:
        """Row indices of the nearest words for a batch of query vectors.

        ``method="scan"`` is the exhaustive reference. ``method="gemm"`` ranks
        candidates with the matrix-product expansion of the squared distance
        and then re-scores every candidate within a rounding margin of the
        best one exactly, so both methods return identical indices.
        """
        q = self._check_query(queries)
        if q.ndim == 1:
            q = q[None, :]
        if method == "auto":
            method = "scan" if len(self) * self.dimension <= 4096 else "gemm"
        if method == "scan":
            return self._scan(q)
        if method == "gemm":
            return self._gemm(q)
        raise ValueError(f"unknown method {method!r}")

    def nearest_words(self, queries, method: str = "auto") -> list[str]:
        return [self._words[i] for i in self.nearest_indices(queries, method)]

    def _scan(self, q: np.ndarray) -> np.ndarray:
        out = np.empty(len(q), dtype=np.intp)
        step = max(1, _SCAN_CHUNK_ELEMENTS // (len(self) * self.dimension))
        for s in range(0, len(q), step):
            block = q[s : s + step]
            d = _sqdist(self._matrix[None, :, :], block[:, None, :])
            out[s : s + step] = np.argmin(d, axis=1)
        return out

    def _gemm(self, q: np.ndarray) -> np.ndarray:
        out = np.empty(len(q), dtype=np.intp)
        qn = np.einsum("ij,ij->i", q, q)
        max_norm = float(self._sqnorms.max())
        step = max(1, _SCAN_CHUNK_ELEMENTS // len(self))
        for s in range(0, len(q), step):
            block = q[s : s + step]
            approx = self._sqnorms[None, :] - 2.0 * (block @ self._matrix.T) + qn[s : s + step, None]
            best = approx.min(axis=1)
            # Rounding in the expansion is bounded by a small multiple of
            # machine epsilon times the magnitudes involved.
            margin = 1e-9 * (max_norm + qn[s : s + step]) + 1e-300
            cand = approx <= (best + margin)[:, None]
            single = cand.sum(axis=1) == 1
            out[s : s + step][single] = np.argmax(cand[single], axis=1)
            for r in np.flatnonzero(~single):
                idx = np.flatnonzero(cand[r])
                exact = _sqdist(self._matrix[idx], block[r])
                out[s + r] = idx[int(np.argmin(exact))]
        return out


def load_embeddings(source: PathOrStream) -> EmbeddingTable:
    """Parse an embedding text file (path or binary stream) into a table.

    The dimension is taken from the first row; any later row with a
    different number of floats, a repeated token or an unparseable or
    non-finite value is rejected with the offending line number.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return _parse(fh)
    return _parse(source)


def _parse(stream: BinaryIO) -> EmbeddingTable:
    entries: dict[str, list[float]] = {}
    dim = None
    text = io.TextIOWrapper(stream, encoding="utf-8", newline=None)
    try:
        for lineno, line in enumerate(text, start=1):
            line = line.rstrip("\r\n").rstrip(" ")
            if not line:
                continue
            fields = line.split(" ")
            token, values = fields[0], fields[1:]
            if not token:
                raise EmbeddingFormatError("line starts with a space", lineno)
            if not values:
                raise EmbeddingFormatError(f"no vector for token {token!r}", lineno)
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DimensionMismatchError(
                    f"line {lineno}: token {token!r} has {len(values)} components, expected {dim}"
                )
            if token in entries:
                raise EmbeddingFormatError(f"duplicate token {token!r}", lineno)
            try:
                vec = [float(x) for x in values]
            except ValueError as exc:
                raise EmbeddingFormatError(f"unparseable float ({exc})", lineno) from None
            if not all(math.isfinite(x) for x in vec):
                raise EmbeddingFormatError(f"non-finite component for {token!r}", lineno)
            entries[token] = vec
    except UnicodeDecodeError as exc:
        raise EmbeddingFormatError(f"input is not UTF-8 ({exc})") from None
    finally:
        text.detach()
    if not entries:
        raise EmbeddingFormatError("empty embedding stream")
    return EmbeddingTable(entries)


def save_embeddings(table: EmbeddingTable, dest: PathOrStream) -> None:
    """Write ``table`` in the text format; floats use ``repr`` so reloads are bit-exact."""
    lines = (
        w + " " + " ".join(repr(float(x)) for x in row) + "\n"
        for w, row in zip(table.words, table.matrix)
    )
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
    else:
        for line in lines:
            dest.write(line.encode("utf-8"))


def lookup(table: EmbeddingTable, word: str) -> np.ndarray:
    return table.lookup(word)


def word_distance(table: EmbeddingTable, w1: str, w2: str) -> float:
    return table.word_distance(w1, w2)


def nearest_word(table: EmbeddingTable, v) -> str:
    return table.nearest_word(v)
