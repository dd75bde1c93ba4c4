"""Command-line interface for the embedding extractor.

Exit codes: 0 success, 1 usage/configuration error, 2 corpus or file error,
3 backend unavailable, 4 extraction finished but skipped some utterances.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import BackendUnavailableError
from .format import FormatError
from .jobs import CorpusError, ExtractionJob, extract, verify_pairing
from .registry import REPRESENTATIONS, UnknownRepresentationError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class UsageError(Exception):
    pass


def cmd_extract(args) -> int:
    job = ExtractionJob(
        corpus=args.corpus,
        representation=args.rep,
        output=args.out,
        backend=args.backend,
        model_path=args.model_path,
    )
    result = extract(job)
    print(f"wrote {result.written} vectors of dim "
          f"{REPRESENTATIONS[job.representation]['dim']} to {job.output}")
    if result.skipped:
        for sid, reason in result.skipped:
            print(f"skipped {sid}: {reason}", file=sys.stderr)
        print(f"{len(result.skipped)} utterance(s) skipped", file=sys.stderr)
        return 4
    return 0


def cmd_verify_pairing(args) -> int:
    report = verify_pairing(args.file_a, args.file_b)
    print(f"{args.file_a}: {report.count_a} samples")
    print(f"{args.file_b}: {report.count_b} samples")
    if report.aligned:
        print("aligned: yes")
    else:
        for sid in report.missing_in_a:
            print(f"missing in first file: {sid}")
        for sid in report.missing_in_b:
            print(f"missing in second file: {sid}")
        for sid, la, lb in report.label_disagreements:
            print(f"label disagreement for {sid}: {la!r} vs {lb!r}")
        print("aligned: no")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hyfuse-extractor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract one representation from a corpus directory")
    p.add_argument("--corpus", required=True, help="directory of .wav files plus labels.csv")
    p.add_argument("--rep", required=True, help=f"one of {sorted(REPRESENTATIONS)}")
    p.add_argument("--out", required=True, help="output .hyfe path")
    p.add_argument("--backend", choices=("pretrained", "stub"), default="pretrained")
    p.add_argument("--model-path", dest="model_path",
                   help="local checkpoint path overriding the default model id")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify-pairing", help="report id/label alignment of two embedding files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.set_defaults(func=cmd_verify_pairing)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, UnknownRepresentationError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, FormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BackendUnavailableError as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
