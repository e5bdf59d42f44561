"""Word-by-word document obfuscation.

Pipeline per document: tokenize, drop stopwords, drop (and record) words
missing from the embedding table, resample to a fixed length from the
document's word frequencies, then replace every word by the vocabulary word
nearest to its Laplace-perturbed vector.
"""

from __future__ import annotations

import os
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import CorpusError, EmptyDocumentError, OOVError
from .laplace import sample_noise, sample_noise_batch, validate_epsilon
from .transport import BowDocument


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset = frozenset()
    fixed_length: int = 20
    lowercase: bool = True

    def __post_init__(self):
        if int(self.fixed_length) != self.fixed_length or self.fixed_length < 1:
            raise ValueError(f"fixed_length must be a positive integer, got {self.fixed_length}")
        words = frozenset(self.stopwords)
        if self.lowercase:
            words = frozenset(w.lower() for w in words)
        object.__setattr__(self, "stopwords", words)


@dataclass(frozen=True)
class ObfuscationReport:
    input_length: int
    output_words: BowDocument
    tokens: tuple[str, ...]  # output words in slot order
    oov_words: list[str] = field(default_factory=list)
    seed: int | None = None
    epsilon: float = 1.0

    def to_record(self, index: int | None = None) -> dict:
        rec = {
            "seed": self.seed,
            "epsilon": self.epsilon,
            "input_length": self.input_length,
            "output_length": self.output_words.length,
            "oov": list(self.oov_words),
        }
        if index is not None:
            rec = {"index": index, **rec}
        return rec


def load_stopwords(path: str | os.PathLike) -> frozenset:
    """One token per line; blank lines and surrounding whitespace ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(raw: str, lowercase: bool = True) -> list[str]:
    """Split on Unicode whitespace and strip punctuation from both ends of each piece.

    >>> tokenize("Cat, sat. (on) the-mat!")
    ['cat', 'sat', 'on', 'the-mat']
    """
    out = []
    for piece in raw.split():
        start, end = 0, len(piece)
        while start < end and _is_punct(piece[start]):
            start += 1
        while end > start and _is_punct(piece[end - 1]):
            end -= 1
        tok = piece[start:end]
        if tok:
            out.append(tok.lower() if lowercase else tok)
    return out


def preprocess(raw: str, config: PreprocessConfig) -> BowDocument:
    tokens = [t for t in tokenize(raw, config.lowercase) if t not in config.stopwords]
    if not tokens:
        raise EmptyDocumentError("document is empty after tokenization and stopword removal")
    return BowDocument(tokens)


def _rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), (None if rng is None else int(rng))


def _fix_length_tokens(d: BowDocument, m: int, rng: np.random.Generator) -> list[str]:
    counts = d.counts()
    words = sorted(counts)
    p = np.array([counts[w] for w in words], dtype=np.float64) / d.length
    picks = rng.choice(len(words), size=m, p=p)
    return [words[i] for i in picks]


def fix_length(d: BowDocument, m: int, rng) -> BowDocument:
    """Draw ``m`` words i.i.d. (with replacement) from the word frequencies of ``d``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    rng, _ = _rng(rng)
    return BowDocument(_fix_length_tokens(_as_bow(d), int(m), rng))


def _as_bow(d) -> BowDocument:
    return d if isinstance(d, BowDocument) else BowDocument(d)


def obfuscate_word(table: EmbeddingTable, w: str, eps: float, rng) -> str:
    """Perturb the vector of ``w`` and snap back to the nearest vocabulary word."""
    rng, _ = _rng(rng)
    z = sample_noise(table.lookup(w), eps, rng)
    return table.nearest_word(z)


def obfuscate_words(table: EmbeddingTable, words: Sequence[str], eps: float, rng) -> list[str]:
    """Independent :func:`obfuscate_word` on each slot, vectorised."""
    rng, _ = _rng(rng)
    X = table.matrix[[table.index(w) for w in words]]
    Z = sample_noise_batch(X, eps, rng)
    return table.nearest_words(Z)


def obfuscate_document(
    table: EmbeddingTable,
    raw: str,
    config: PreprocessConfig,
    eps: float,
    rng,
    strict_oov: bool = False,
) -> ObfuscationReport:
    """Run the whole per-document pipeline.

    ``rng`` is an int seed or a Generator; an int is recorded in the report.
    Out-of-vocabulary words are skipped and listed unless ``strict_oov``.
    """
    eps = validate_epsilon(eps)
    gen, seed = _rng(rng)
    bow = preprocess(raw, config)
    known, oov = [], []
    for t in bow.tokens:
        if t in table:
            known.append(t)
        elif strict_oov:
            raise OOVError(t)
        else:
            oov.append(t)
    if not known:
        raise EmptyDocumentError(f"no in-vocabulary words (skipped {len(oov)} OOV)")
    slots = _fix_length_tokens(BowDocument(known), config.fixed_length, gen)
    out = obfuscate_words(table, slots, eps, gen)
    return ObfuscationReport(
        input_length=bow.length,
        output_words=BowDocument(out),
        tokens=tuple(out),
        oov_words=oov,
        seed=seed,
        epsilon=eps,
    )


def obfuscate_corpus(
    table: EmbeddingTable,
    docs: Iterable[str],
    config: PreprocessConfig,
    eps: float,
    base_seed: int,
    strict_oov: bool = False,
    workers: int = 1,
) -> list[ObfuscationReport]:
    """Obfuscate each document with its own generator seeded ``base_seed + index``.

    Output order matches input order and does not depend on ``workers``.
    Every failing document is collected and reported together in a
    :class:`CorpusError`.
    """
    eps = validate_epsilon(eps)
    docs = list(docs)

    def one(i):
        try:
            return obfuscate_document(table, docs[i], config, eps, int(base_seed) + i, strict_oov)
        except (EmptyDocumentError, OOVError) as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(docs))))
    else:
        results = [one(i) for i in range(len(docs))]
    errors = [(i, r) for i, r in enumerate(results) if isinstance(r, Exception)]
    if errors:
        raise CorpusError(errors)
    return results
