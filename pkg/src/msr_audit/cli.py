"""Command-line interface.

Subcommands: audit (full two-cohort run), sweep (shots / temperature /
length), match (maximal matches between two raw text files), stats (compare
two frequency CSVs), transcript (print the faux transcript for one document).

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Sequence

from msr_audit import __version__
from msr_audit.corpus import CorpusError, load_corpus, tokenize, tokenize_document, truncate
from msr_audit.gateway import Backend, BackendError, backend_from_spec
from msr_audit.matching import frequency_array, maximal_common_substrings
from msr_audit.prompting import DEFAULT_SYSTEM_PROMPT, build_transcript, format_transcript, segment
from msr_audit.runner import (
    ExperimentConfig,
    emit_report,
    run_audit,
    sweep_length,
    sweep_shots,
    sweep_temperature,
)
from msr_audit.stats import compare_samples

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        # argparse defaults to exit code 2, which we reserve for data errors.
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pre", required=True, help="JSONL corpus for the likely-trained cohort")
    parser.add_argument("--post", required=True, help="JSONL corpus for the post-cutoff control cohort")
    parser.add_argument(
        "--backend",
        default="verbatim",
        help="live | verbatim | oblivious | partial:P (default: %(default)s)",
    )
    parser.add_argument("--backend-pre", help="override backend for the pre cohort only")
    parser.add_argument("--backend-post", help="override backend for the post cohort only")
    parser.add_argument("--model", default="mock", help="model name sent to the live backend")
    parser.add_argument("--shots", type=int, default=6, help="segments per document, even (default: %(default)s)")
    parser.add_argument("--lmin", type=int, default=5, help="smallest match length tracked (default: %(default)s)")
    parser.add_argument("--lmax", type=int, default=12, help="largest match length tracked (default: %(default)s)")
    parser.add_argument("--temperature", type=float, default=0.1)
    parser.add_argument("--min-words", type=int, default=1000, help="keep documents strictly longer than this")
    parser.add_argument("--truncate", type=int, default=None, metavar="L", help="cap every document at L words")
    parser.add_argument("--concurrency", type=int, default=4, help="max in-flight completions")
    parser.add_argument("--cache", default=None, metavar="PATH", help="JSONL completion cache")
    parser.add_argument("--seed", type=int, default=0, help="seed for the mock backends")
    parser.add_argument("--out", default="msr_report", metavar="DIR", help="report directory (default: %(default)s)")
    parser.add_argument("--base-url", default=None, help="live backend base URL (or MSR_BASE_URL)")
    parser.add_argument("--system-prompt", default=DEFAULT_SYSTEM_PROMPT)
    parser.add_argument("--lowercase", action="store_true", help="case-fold before tokenizing")
    parser.add_argument("--exact-lengths", action="store_true", help="count exact lengths instead of >= k")
    parser.add_argument("--max-tokens", type=int, default=None, help="completion budget (default: auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msr", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_audit = sub.add_parser("audit", help="run the full two-cohort audit")
    _add_run_options(p_audit)
    p_audit.set_defaults(func=cmd_audit)

    p_sweep = sub.add_parser("sweep", help="re-run the audit across one parameter")
    p_sweep.add_argument("dimension", choices=["shots", "temperature", "length"])
    p_sweep.add_argument(
        "--values", required=True, nargs="+", help="comma- or space-separated values to sweep"
    )
    _add_run_options(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_match = sub.add_parser("match", help="maximal matches between two raw text files")
    p_match.add_argument("reference", help="reference text file")
    p_match.add_argument("generated", help="generated text file")
    p_match.add_argument("--lmin", type=int, default=5)
    p_match.add_argument("--lmax", type=int, default=12)
    p_match.add_argument("--lowercase", action="store_true")
    p_match.add_argument("--exact-lengths", action="store_true")
    p_match.set_defaults(func=cmd_match)

    p_stats = sub.add_parser("stats", help="compare two frequency CSVs (pre, post)")
    p_stats.add_argument("pre_csv")
    p_stats.add_argument("post_csv")
    p_stats.set_defaults(func=cmd_stats)

    p_tr = sub.add_parser("transcript", help="print the faux transcript for one document")
    p_tr.add_argument("--corpus", required=True, help="JSONL corpus file")
    p_tr.add_argument("--doc", required=True, metavar="ID", help="document id")
    p_tr.add_argument("--shots", type=int, default=6)
    p_tr.add_argument("--system-prompt", default=DEFAULT_SYSTEM_PROMPT)
    p_tr.add_argument("--truncate", type=int, default=None, metavar="L")
    p_tr.add_argument("--lowercase", action="store_true")
    p_tr.set_defaults(func=cmd_transcript)

    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        backend=args.backend,
        model=args.model,
        shots=args.shots,
        l_min=args.lmin,
        l_max=args.lmax,
        temperature=args.temperature,
        min_words=args.min_words,
        truncate_words=args.truncate,
        max_in_flight=args.concurrency,
        cache_path=args.cache,
        seed=args.seed,
        system_prompt=args.system_prompt,
        lowercase=args.lowercase,
        exact_lengths=args.exact_lengths,
        max_tokens=args.max_tokens,
        base_url=args.base_url,
    )


def _load_cohorts(args: argparse.Namespace) -> list:
    """The --pre/--post flags assign cohorts, overriding any cohort field."""
    pre = load_corpus(args.pre, cohort_override="pre")
    post = load_corpus(args.post, cohort_override="post")
    seen = {doc.id for doc in pre}
    clashes = sorted(seen & {doc.id for doc in post})
    if clashes:
        raise CorpusError(f"document ids appear in both cohorts: {clashes[:5]}")
    return pre + post


def _cohort_backends(args: argparse.Namespace) -> dict[str, Backend] | None:
    if not args.backend_pre and not args.backend_post:
        return None
    return {
        "pre": backend_from_spec(args.backend_pre or args.backend, base_url=args.base_url),
        "post": backend_from_spec(args.backend_post or args.backend, base_url=args.base_url),
    }


def cmd_audit(args: argparse.Namespace) -> int:
    corpus = _load_cohorts(args)
    report = run_audit(corpus, _config_from_args(args), backends=_cohort_backends(args))
    paths = emit_report(report, args.out)
    print(json.dumps(asdict(report.comparison), sort_keys=True))
    print(f"wrote {paths['summary']}")
    print(f"wrote {paths['frequencies']}")
    return EXIT_OK


def _parse_values(raw: Sequence[str], cast: Callable) -> list:
    values = []
    for chunk in raw:
        for piece in chunk.split(","):
            piece = piece.strip()
            if not piece:
                continue
            try:
                values.append(cast(piece))
            except ValueError:
                raise ValueError(f"bad sweep value {piece!r}") from None
    if not values:
        raise ValueError("no sweep values given")
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus = _load_cohorts(args)
    config = _config_from_args(args)
    backends = _cohort_backends(args)
    low_vs_high = None
    if args.dimension == "shots":
        results = sweep_shots(corpus, config, _parse_values(args.values, int), backends=backends)
    elif args.dimension == "length":
        results = sweep_length(corpus, config, _parse_values(args.values, int), backends=backends)
    else:
        sweep = sweep_temperature(corpus, config, _parse_values(args.values, float), backends=backends)
        results = sweep.reports
        low_vs_high = sweep.low_vs_high

    out = Path(args.out)
    for value, report in results.items():
        label = f"{value:g}" if isinstance(value, float) else str(value)
        paths = emit_report(report, out / f"{args.dimension}_{label}")
        line = {"value": value}
        line.update(asdict(report.comparison))
        print(json.dumps(line, sort_keys=True))
        print(f"wrote {paths['summary']}", file=sys.stderr)
    if low_vs_high is not None:
        payload = {"low_vs_high": asdict(low_vs_high)}
        out.mkdir(parents=True, exist_ok=True)
        contrast_path = out / "low_vs_high.json"
        contrast_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(json.dumps(payload, sort_keys=True))
        print(f"wrote {contrast_path}", file=sys.stderr)
    return EXIT_OK


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc


def cmd_match(args: argparse.Namespace) -> int:
    if args.lmin < 1 or args.lmax < args.lmin:
        raise ValueError(f"need 1 <= lmin <= lmax, got lmin={args.lmin} lmax={args.lmax}")
    ref_text = _read_text(args.reference)
    gen_text = _read_text(args.generated)
    if args.lowercase:
        ref_text, gen_text = ref_text.lower(), gen_text.lower()
    ref = tuple(t.text for t in tokenize(ref_text))
    gen = tuple(t.text for t in tokenize(gen_text))
    matches = maximal_common_substrings(ref, gen)
    counts = frequency_array(matches, args.lmin, args.lmax, exact=args.exact_lengths)

    longest = max((m.length for m in matches), default=0)
    print(f"longest={longest} matches={len(matches)}")
    print("length,pos_ref,pos_gen")
    for match in matches:
        print(f"{match.length},{match.pos_ref},{match.pos_gen}")
    print()
    print("k,count")
    for offset, k in enumerate(range(counts.l_min, counts.l_max + 1)):
        print(f"{k},{counts.counts[offset]}")
    return EXIT_OK


def _read_counts(path: str) -> list[float]:
    """Counts from a CSV; uses the last column, tolerating a header row."""
    counts: list[float] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(_read_text(path))), start=1):
        if not row:
            continue
        cell = row[-1].strip()
        try:
            counts.append(float(cell))
        except ValueError:
            if lineno == 1:
                continue
            raise CorpusError(f"{path}:{lineno}: not a number: {cell!r}") from None
    if not counts:
        raise CorpusError(f"{path}: no counts found")
    return counts


def cmd_stats(args: argparse.Namespace) -> int:
    pre = _read_counts(args.pre_csv)
    post = _read_counts(args.post_csv)
    comparison = compare_samples(post, pre)
    print(json.dumps(asdict(comparison), sort_keys=True))
    return EXIT_OK


def cmd_transcript(args: argparse.Namespace) -> int:
    # Cohort is irrelevant here; the override keeps the field optional, matching
    # how audit corpora are loaded via --pre/--post.
    docs = load_corpus(args.corpus, cohort_override="pre")
    by_id = {doc.id: doc for doc in docs}
    if args.doc not in by_id:
        raise CorpusError(f"no document with id {args.doc!r} in {args.corpus}")
    doc = tokenize_document(by_id[args.doc], lowercase=args.lowercase)
    if args.truncate is not None:
        doc = truncate(doc, args.truncate)
    transcript = build_transcript(doc, segment(doc, args.shots), system_prompt=args.system_prompt)
    print(format_transcript(transcript))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=logging.WARNING)
    try:
        status = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # Downstream pipe closed early (e.g. `msr transcript | head`); point
        # stdout at devnull so the interpreter's exit flush stays quiet.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        status = EXIT_OK
    raise SystemExit(status)


if __name__ == "__main__":
    entrypoint()
