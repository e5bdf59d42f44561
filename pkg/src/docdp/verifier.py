"""Exact and Monte Carlo checks of the privacy guarantees on small instances.

In one dimension every Voronoi cell of the vocabulary is an interval, so the
probability that a word snaps to each output word is a closed-form Laplace
CDF difference. Document-level output probabilities are then sums, over the
distinct orderings of the output multiset, of products of word-level
probabilities.

The document bound uses the whole-word transport cost: the minimum over
matchings of the summed word distances, i.e. the Word Mover's Distance with
unit (rather than 1/n) mass per word. With the normalised distance the bound
does not hold for documents longer than one word.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import DimensionMismatchError, EnumerationBoundError, OOVError
from .laplace import validate_epsilon
from .obfuscator import obfuscate_words
from .transport import BowDocument, brute_force_min_permutation, cost_matrix

WORD_TOLERANCE = 1e-9
DOCUMENT_TOLERANCE = 1e-7
MAX_EXACT_VOCAB = 100
MAX_DOC_LENGTH = 4
MAX_OUTPUT_VOCAB = 10


@dataclass(frozen=True)
class WordOutputDistribution:
    input_word: str
    probabilities: dict[str, float]
    standard_errors: dict[str, float] | None = None
    trials: int | None = None

    def log(self, v: str) -> float:
        p = self.probabilities.get(v, 0.0)
        return math.log(p) if p > 0 else -math.inf


@dataclass(frozen=True)
class DocumentOutputDistribution:
    input_doc: BowDocument
    probabilities: dict[BowDocument, float]


@dataclass(frozen=True)
class PrivacyCheckResult:
    pairs_checked: int
    max_log_ratio_excess: float
    passed: bool
    tolerance: float
    outputs_checked: int = 0
    worst: tuple | None = None  # (x, x', z) attaining the maximum excess
    statistical: bool = False
    notes: tuple[str, ...] = field(default=())

    def report_lines(self) -> list[str]:
        lines = [
            f"mode={'statistical' if self.statistical else 'exact'}",
            f"pairs_checked={self.pairs_checked}",
            f"outputs_checked={self.outputs_checked}",
            f"max_log_ratio_excess={self.max_log_ratio_excess!r}",
            f"tolerance={self.tolerance!r}",
        ]
        if self.worst is not None:
            x, xp, z = self.worst
            lines.append(f"worst_pair={_fmt(x)} | {_fmt(xp)}")
            lines.append(f"worst_output={_fmt(z)}")
        lines += [f"note={n}" for n in self.notes]
        lines.append(f"result={'PASS' if self.passed else 'FAIL'}")
        return lines


def _fmt(obj) -> str:
    if isinstance(obj, BowDocument):
        return "{" + " ".join(obj.tokens) + "}"
    return str(obj)


def _require_1d(table: EmbeddingTable):
    if table.dimension != 1:
        raise DimensionMismatchError(
            f"exact verification needs 1-D embeddings, table has dimension {table.dimension}"
        )


def _laplace_interval_mass(x: float, lo: float, hi: float, eps: float) -> float:
    """P(lo < Z < hi) for Z ~ Laplace(x, 1/eps), written to avoid cancellation in the tails."""
    if hi <= lo:
        return 0.0
    if lo >= x:
        # 0.5 * (exp(-eps (lo - x)) - exp(-eps (hi - x)))
        if math.isinf(hi):
            return 0.5 * math.exp(-eps * (lo - x))
        return -0.5 * math.exp(-eps * (lo - x)) * math.expm1(-eps * (hi - lo))
    if hi <= x:
        if math.isinf(lo):
            return 0.5 * math.exp(-eps * (x - hi))
        return -0.5 * math.exp(-eps * (x - hi)) * math.expm1(-eps * (hi - lo))
    left = 0.0 if math.isinf(lo) else 0.5 * math.exp(-eps * (x - lo))
    right = 0.0 if math.isinf(hi) else 0.5 * math.exp(-eps * (hi - x))
    return 1.0 - left - right


def voronoi_intervals_1d(table: EmbeddingTable) -> dict[str, tuple[float, float]]:
    """Snap cell of every word on the real line.

    Words sharing a position share one cell, owned by the smallest token;
    the others get an empty interval.
    """
    _require_1d(table)
    pos = table.matrix[:, 0]
    # Stable sort keeps lexicographic order among equal positions.
    order = np.argsort(pos, kind="stable")
    owners = []
    for i in order:
        if owners and pos[owners[-1]] == pos[i]:
            continue
        owners.append(int(i))
    cells = {w: (0.0, 0.0) for w in table.words}
    for k, i in enumerate(owners):
        lo = -math.inf if k == 0 else (pos[owners[k - 1]] + pos[i]) / 2
        hi = math.inf if k == len(owners) - 1 else (pos[i] + pos[owners[k + 1]]) / 2
        cells[table.words[i]] = (float(lo), float(hi))
    return cells


def exact_word_distribution_1d(table: EmbeddingTable, w: str, eps: float) -> WordOutputDistribution:
    """Probability of each output word when ``w`` is perturbed and snapped, in closed form."""
    _require_1d(table)
    eps = validate_epsilon(eps)
    if len(table) > MAX_EXACT_VOCAB:
        raise EnumerationBoundError(f"vocabulary of {len(table)} words exceeds {MAX_EXACT_VOCAB}")
    x = float(table.lookup(w)[0])
    cells = voronoi_intervals_1d(table)
    probs = {v: _laplace_interval_mass(x, lo, hi, eps) for v, (lo, hi) in cells.items()}
    return WordOutputDistribution(w, probs)


def mc_word_distribution(
    table: EmbeddingTable, w: str, eps: float, trials: int, rng
) -> WordOutputDistribution:
    """Empirical output frequencies of the word mechanism, with per-cell standard errors."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if w not in table:
        raise OOVError(w)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    out = obfuscate_words(table, [w] * int(trials), eps, rng)
    counts = np.zeros(len(table), dtype=np.int64)
    idx = np.fromiter((table.index(v) for v in out), dtype=np.intp, count=len(out))
    np.add.at(counts, idx, 1)
    p = counts / trials
    se = np.sqrt(p * (1 - p) / trials)
    return WordOutputDistribution(
        w,
        dict(zip(table.words, p.tolist())),
        dict(zip(table.words, se.tolist())),
        int(trials),
    )


def output_documents(vocabulary: Iterable[str], length: int) -> list[BowDocument]:
    """Every multiset of ``length`` words drawn from ``vocabulary``."""
    vocab = sorted(set(vocabulary))
    return [BowDocument(c) for c in itertools.combinations_with_replacement(vocab, length)]


def document_distribution(
    word_dists: Mapping[str, WordOutputDistribution], d
) -> DocumentOutputDistribution:
    """Output distribution over bags of words for input document ``d``.

    For each output multiset z, sums the product of word-level
    probabilities over the distinct orderings of z matched against a fixed
    ordering of ``d``.
    """
    d = d if isinstance(d, BowDocument) else BowDocument(d)
    if d.length > MAX_DOC_LENGTH:
        raise EnumerationBoundError(f"document length {d.length} exceeds {MAX_DOC_LENGTH}")
    missing = [w for w in set(d.tokens) if w not in word_dists]
    if missing:
        raise OOVError(missing[0], "no word distribution supplied")
    vocab = sorted(set().union(*(word_dists[w].probabilities for w in d.tokens)))
    if len(vocab) > MAX_OUTPUT_VOCAB:
        raise EnumerationBoundError(f"output vocabulary of {len(vocab)} exceeds {MAX_OUTPUT_VOCAB}")
    rows = [word_dists[w].probabilities for w in d.tokens]
    probs = {}
    for z in output_documents(vocab, d.length):
        total = 0.0
        for arrangement in sorted(set(itertools.permutations(z.tokens))):
            term = 1.0
            for row, v in zip(rows, arrangement):
                term *= row.get(v, 0.0)
            total += term
        probs[z] = total
    return DocumentOutputDistribution(d, probs)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _log_excess(lp: float, lq: float, bound: float) -> float:
    if lp == -math.inf:
        return -math.inf
    if lq == -math.inf:
        return math.inf
    return lp - lq - bound


def whole_word_cost(table: EmbeddingTable, d1: BowDocument, d2: BowDocument) -> float:
    """Minimum summed word distance over whole-word matchings (brute force)."""
    return brute_force_min_permutation(cost_matrix(table, d1, d2).entries).total_cost


def check_word_privacy(
    table: EmbeddingTable, eps: float, tolerance: float = WORD_TOLERANCE, bound_scale: float = 1.0
) -> PrivacyCheckResult:
    """Check log K(w)(v) - log K(w')(v) <= eps * d(w, w') for every word pair and output."""
    _require_1d(table)
    eps = validate_epsilon(eps)
    dists = {w: exact_word_distribution_1d(table, w, eps) for w in table.words}
    worst, worst_at, pairs, outputs = -math.inf, None, 0, 0
    for w, wp in itertools.product(table.words, repeat=2):
        pairs += 1
        bound = bound_scale * eps * table.word_distance(w, wp)
        for v in table.words:
            outputs += 1
            e = _log_excess(dists[w].log(v), dists[wp].log(v), bound)
            if e > worst:
                worst, worst_at = e, (w, wp, v)
    return PrivacyCheckResult(pairs, worst, worst <= tolerance, tolerance, outputs, worst_at)


def check_document_indistinguishability(
    table: EmbeddingTable,
    docs: Sequence,
    eps: float,
    tolerance: float = DOCUMENT_TOLERANCE,
    bound_scale: float = 1.0,
) -> PrivacyCheckResult:
    """Exact document-level check over every ordered pair of ``docs`` and every output bag.

    ``bound_scale`` multiplies the allowed log ratio; values below 1 give a
    negative control that a correct mechanism is expected to fail.
    """
    _require_1d(table)
    eps = validate_epsilon(eps)
    docs = [d if isinstance(d, BowDocument) else BowDocument(d) for d in docs]
    if not docs:
        raise ValueError("no documents to check")
    lengths = {d.length for d in docs}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"documents must share one length, got {sorted(lengths)}")
    n = lengths.pop()
    if n > MAX_DOC_LENGTH:
        raise EnumerationBoundError(f"document length {n} exceeds {MAX_DOC_LENGTH}")
    if len(table) > MAX_OUTPUT_VOCAB:
        raise EnumerationBoundError(f"vocabulary of {len(table)} exceeds {MAX_OUTPUT_VOCAB}")
    for d in docs:
        for w in d.tokens:
            if w not in table:
                raise OOVError(w, f"document {_fmt(d)}")
    word_dists = {w: exact_word_distribution_1d(table, w, eps) for w in table.words}
    unique = list(dict.fromkeys(docs))
    outputs = output_documents(table.words, n)
    logp = {}
    for d in unique:
        dist = document_distribution(word_dists, d).probabilities
        logp[d] = np.array([_log(dist[z]) for z in outputs])
    worst, worst_at, pairs = -math.inf, None, 0
    with np.errstate(invalid="ignore"):
        for d, dp in itertools.product(unique, repeat=2):
            pairs += 1
            bound = bound_scale * eps * whole_word_cost(table, d, dp)
            lp, lq = logp[d], logp[dp]
            excess = np.where(
                lp == -np.inf, -np.inf, np.where(lq == -np.inf, np.inf, lp - lq - bound)
            )
            k = int(np.argmax(excess))
            if excess[k] > worst:
                worst, worst_at = float(excess[k]), (d, dp, outputs[k])
    notes = (
        "bound uses the whole-word transport cost (unit mass per word)",
        "fixed-length resampling before the mechanism is not covered by this check",
    )
    return PrivacyCheckResult(
        pairs, worst, worst <= tolerance, tolerance, pairs * len(outputs), worst_at, notes=notes
    )


def mc_check_word_privacy(
    table: EmbeddingTable,
    eps: float,
    trials: int,
    rng,
    min_count: int = 200,
) -> PrivacyCheckResult:
    """Statistical word-level check for tables of any dimension.

    Word distributions are estimated by simulation and the log ratio is only
    compared on cells where both estimates rest on at least ``min_count``
    hits. The excess therefore carries sampling error; the tolerance is set
    from the worst relative standard error of the compared cells (3 sigma on
    each side of the ratio).
    """
    eps = validate_epsilon(eps)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dists = {w: mc_word_distribution(table, w, eps, trials, rng) for w in table.words}
    # Reported excess/tolerance are taken at the cell with the largest
    # excess-minus-tolerance, which is the one that decides pass/fail.
    margin, worst, worst_at, tol = -math.inf, -math.inf, None, 0.0
    pairs = outputs = 0
    for w, wp in itertools.product(table.words, repeat=2):
        pairs += 1
        bound = eps * table.word_distance(w, wp)
        for v in table.words:
            p, q = dists[w].probabilities[v], dists[wp].probabilities[v]
            if p * trials < min_count or q * trials < min_count:
                continue
            outputs += 1
            e = math.log(p) - math.log(q) - bound
            rel = 3 * (math.sqrt((1 - p) / (p * trials)) + math.sqrt((1 - q) / (q * trials)))
            if e - rel > margin:
                margin, worst, worst_at, tol = e - rel, e, (w, wp, v), rel
    return PrivacyCheckResult(
        pairs,
        worst,
        worst <= tol,
        tol,
        outputs,
        worst_at,
        statistical=True,
        notes=(f"monte carlo, {trials} trials per word, cells with >= {min_count} hits",),
    )
