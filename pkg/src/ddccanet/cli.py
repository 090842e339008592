"""Command-line entry point: train, extract, eval, bench."""

from __future__ import annotations

import argparse
import sys

from .errors import DdccanetError
from .pipeline import load_pipeline_config, run_bench, run_eval, run_extract, run_train
from .report import bench_text, eval_report_text


def _add_exec_flags(parser: argparse.ArgumentParser, with_threads: bool = True) -> None:
    if with_threads:
        parser.add_argument("--threads", type=int, default=None, help="override exec.threads")
    parser.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="fixed merge tree, bit-identical for any thread count (default: on)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override exec.seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddccanet",
        description="Two-view discriminant correlation filter network: "
        "train, extract features, evaluate, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train filters and classifier from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--model", default="model.ddcca", help="output model file")
    p.add_argument("--report-dir", default=None, help="write report CSV/text/figures here")
    _add_exec_flags(p)

    p = sub.add_parser("extract", help="write deep features for a manifest as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_exec_flags(p)

    p = sub.add_parser("eval", help="evaluate a trained model on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report-dir", default=None)
    _add_exec_flags(p)

    p = sub.add_parser("bench", help="time accumulation/forward at several thread counts")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", default="1", help="comma-separated list, e.g. 1,2,4,8")
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--report-dir", default=None)
    p.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--seed", type=int, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = load_pipeline_config(args.config, args.threads, args.deterministic, args.seed)
            _, report = run_train(config, args.model, args.report_dir)
            sys.stdout.write(eval_report_text(report))
        elif args.command == "extract":
            run_extract(
                args.model,
                args.manifest,
                args.out,
                threads=args.threads,
                deterministic=args.deterministic,
            )
        elif args.command == "eval":
            report = run_eval(
                args.model,
                args.manifest,
                report_dir=args.report_dir,
                threads=args.threads,
                deterministic=args.deterministic,
            )
            sys.stdout.write(eval_report_text(report))
        elif args.command == "bench":
            try:
                thread_list = [int(t) for t in args.threads.split(",") if t.strip()]
            except ValueError:
                print(f"error: bad --threads list {args.threads!r}", file=sys.stderr)
                return 2
            config = load_pipeline_config(args.config, None, args.deterministic, args.seed)
            rows = run_bench(config, thread_list, args.out, args.report_dir)
            sys.stdout.write(bench_text(rows))
    except DdccanetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
