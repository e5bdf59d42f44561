"""Command-line front end.

Exit codes: 0 success, 1 verification failed, 2 usage error, 3 data error
(missing/unreadable files, malformed input, out-of-vocabulary words).
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .embeddings import load_embeddings
from .errors import CorpusError, DimensionMismatchError, DocDPError, EnumerationBoundError
from .laplace import sample_noise, validate_epsilon
from .obfuscator import PreprocessConfig, load_stopwords, obfuscate_corpus, preprocess
from .transport import BowDocument, wmd_result
from .verifier import (
    check_document_indistinguishability,
    check_word_privacy,
    mc_check_word_privacy,
    output_documents,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


def _epsilon(text: str) -> float:
    try:
        return validate_epsilon(float(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(args, err) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
    print(f"seed={args.seed}", file=err)
    return args.seed


def _load_table(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"embeddings file not found: {p}")
    return load_embeddings(p)


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"file not found: {p}")
    return p.read_text(encoding="utf-8")


def _config(args, fixed_length=1) -> PreprocessConfig:
    stop = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    return PreprocessConfig(stop, fixed_length, not args.no_lowercase)


def run_obfuscate(args, out, err) -> int:
    table = _load_table(args.embeddings)
    config = _config(args, args.length)
    seed = _seed(args, err)
    docs = _read_text(args.corpus).splitlines()
    reports = obfuscate_corpus(
        table, docs, config, args.epsilon, seed, strict_oov=args.strict_oov, workers=args.workers
    )
    output = Path(args.output)
    report_path = Path(args.report) if args.report else output.with_name(output.name + ".report.jsonl")
    with open(output, "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(" ".join(r.tokens) + "\n")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        for i, r in enumerate(reports):
            fh.write(json.dumps(r.to_record(i), sort_keys=True) + "\n")
    n_oov = sum(len(r.oov_words) for r in reports)
    print(
        f"documents={len(reports)} oov_tokens={n_oov} epsilon={args.epsilon!r} "
        f"length={args.length} seed={seed} output={output} report={report_path}",
        file=out,
    )
    return EXIT_OK


def run_wmd(args, out, err) -> int:
    table = _load_table(args.embeddings)
    config = _config(args)
    docs = []
    for label, path in (("first document", args.doc1), ("second document", args.doc2)):
        bow = preprocess(_read_text(path), config)
        for pos, w in enumerate(bow.tokens):
            if w not in table:
                raise DocDPError(f"out-of-vocabulary word {w!r} in {label} ({path}), position {pos}")
        docs.append(bow)
    res = wmd_result(table, docs[0], docs[1], args.method)
    print(f"{res.distance:.9f}", file=out)
    if args.cross_check:
        if docs[0].length != docs[1].length:
            raise UsageError("--cross-check needs documents of equal length")
        other = "simplex" if res.method == "assignment" else "assignment"
        alt = wmd_result(table, docs[0], docs[1], other)
        print(f"{res.method}={res.distance:.9f}", file=out)
        print(f"{other}={alt.distance:.9f}", file=out)
        if abs(alt.distance - res.distance) > 1e-9:
            print("solver paths disagree", file=err)
            return EXIT_VERIFY_FAILED
    if args.flow:
        print("rows=" + " ".join(res.cost.row_tokens), file=out)
        print("cols=" + " ".join(res.cost.col_tokens), file=out)
        for row in res.flow.entries:
            print(" ".join(f"{x:.9f}" for x in row), file=out)
    return EXIT_OK


def run_sample(args, out, err) -> int:
    seed = _seed(args, err)
    rng = np.random.default_rng(seed)
    if args.center is not None:
        x = np.array([float(t) for t in args.center.split()])
        if args.dim is not None and args.dim != x.size:
            raise UsageError(f"--center has {x.size} components but --dim is {args.dim}")
    else:
        if args.dim is None:
            raise UsageError("one of --dim or --center is required")
        x = np.zeros(args.dim)
    z = sample_noise(x, args.epsilon, rng, size=args.count)
    for row in z:
        if args.radius_only:
            print(repr(float(np.sqrt(((row - x) ** 2).sum()))), file=out)
        else:
            print(" ".join(repr(float(v)) for v in row), file=out)
    return EXIT_OK


def run_nearest(args, out, err) -> int:
    table = _load_table(args.embeddings)
    v = [float(t) for t in args.vector]
    if len(v) != table.dimension:
        raise UsageError(f"vector has {len(v)} components, embeddings have {table.dimension}")
    print(table.nearest_word(v), file=out)
    return EXIT_OK


def _read_docs(path) -> list[BowDocument]:
    docs = []
    for line in _read_text(path).splitlines():
        if line.strip():
            docs.append(BowDocument(line.split()))
    if not docs:
        raise DocDPError(f"no documents in {path}")
    return docs


def run_verify(args, out, err) -> int:
    table = _load_table(args.embeddings)
    if args.mode == "mc":
        seed = _seed(args, err)
        res = mc_check_word_privacy(table, args.epsilon, args.trials, np.random.default_rng(seed))
        print("[word-level]", file=out)
        for line in res.report_lines():
            print(line, file=out)
        return EXIT_OK if res.passed else EXIT_VERIFY_FAILED
    if table.dimension != 1:
        raise UsageError(
            f"exact mode is restricted to 1-D embeddings (got dimension {table.dimension}); use --mode mc"
        )
    if args.docs:
        docs = _read_docs(args.docs)
    else:
        docs = output_documents(table.words, args.length)
    try:
        word = check_word_privacy(table, args.epsilon, bound_scale=args.bound_scale)
        doc = check_document_indistinguishability(
            table, docs, args.epsilon, bound_scale=args.bound_scale
        )
    except (EnumerationBoundError, DimensionMismatchError) as exc:
        raise UsageError(str(exc)) from None
    print(f"epsilon={args.epsilon!r}", file=out)
    print(f"bound_scale={args.bound_scale!r}", file=out)
    print("[word-level]", file=out)
    for line in word.report_lines():
        print(line, file=out)
    print("[document-level]", file=out)
    for line in doc.report_lines():
        print(line, file=out)
    ok = word.passed and doc.passed
    print(f"overall={'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docdp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def text_opts(p):
        p.add_argument("--stopwords", metavar="PATH", help="stopword file, one token per line")
        p.add_argument("--no-lowercase", action="store_true", help="keep token case")

    p = sub.add_parser("obfuscate", help="obfuscate a corpus (one document per line)")
    p.add_argument("corpus", metavar="CORPUS")
    p.add_argument("--embeddings", required=True, metavar="PATH")
    p.add_argument("--epsilon", required=True, type=_epsilon)
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=_positive_int, default=20, metavar="M")
    p.add_argument("--strict-oov", action="store_true", help="fail on out-of-vocabulary words")
    p.add_argument("--output", required=True, metavar="PATH")
    p.add_argument("--report", metavar="PATH", help="report sidecar (default OUTPUT.report.jsonl)")
    p.add_argument("--workers", type=_positive_int, default=1)
    text_opts(p)
    p.set_defaults(func=run_obfuscate)

    p = sub.add_parser("wmd", help="Word Mover's Distance between two documents")
    p.add_argument("doc1", metavar="DOC1")
    p.add_argument("doc2", metavar="DOC2")
    p.add_argument("--embeddings", required=True, metavar="PATH")
    p.add_argument("--method", choices=("auto", "simplex", "assignment"), default="auto")
    p.add_argument("--cross-check", action="store_true", help="equal lengths: compare both solvers")
    p.add_argument("--flow", action="store_true", help="print the optimal flow matrix")
    text_opts(p)
    p.set_defaults(func=run_wmd)

    p = sub.add_parser("sample", help="draw n-dimensional Laplace noise")
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--center", metavar="'X1 X2 ...'", help="vector to perturb (default origin)")
    p.add_argument("--epsilon", required=True, type=_epsilon)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=_positive_int, default=1)
    p.add_argument("--radius-only", action="store_true")
    p.set_defaults(func=run_sample)

    p = sub.add_parser("verify", help="check the privacy bounds on a small vocabulary")
    p.add_argument("--embeddings", required=True, metavar="PATH")
    p.add_argument("--epsilon", required=True, type=_epsilon)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--docs", metavar="PATH", help="equal-length documents, one per line")
    p.add_argument("--length", type=_positive_int, default=2, help="enumerate all documents of this length")
    p.add_argument("--bound-scale", type=float, default=1.0, help="scale the allowed bound (negative control)")
    p.add_argument("--trials", type=_positive_int, default=100_000, help="mc mode: trials per word")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=run_verify)

    p = sub.add_parser("nearest", help="vocabulary word nearest to a vector")
    p.add_argument("vector", nargs="+", metavar="X")
    p.add_argument("--embeddings", required=True, metavar="PATH")
    p.set_defaults(func=run_nearest)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"docdp {args.command}: usage error: {exc}", file=err)
        return EXIT_USAGE
    except CorpusError as exc:
        print(f"docdp {args.command}: {exc}", file=err)
        return EXIT_DATA
    except (OSError, DocDPError, ValueError) as exc:
        print(f"docdp {args.command}: error: {exc}", file=err)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
