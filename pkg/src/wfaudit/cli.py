"""Command-line entry point.

Exit codes: 0 no findings, 1 misconfigurations only, 2 at least one
vulnerability, 3 execution or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, WfauditError
from .exploitability import format_score_table, load_score_table
from .forge import ForgeConfig, Mode
from .pipeline import InputMode, ScanConfig, scan
from .report import EXIT_ERROR, render_human


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wfaudit", description="Audit CI workflows across a software supply chain.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scan", help="scan a project, a repository list, or a workflow directory")
    s.add_argument("--input", required=True, type=Path, help="project dir, repo list file, or workflow dir")
    s.add_argument("--mode", choices=[m.value for m in InputMode], default=InputMode.PROJECT.value)
    s.add_argument("--max-depth", type=int, default=2)
    s.add_argument("--output", type=Path)
    s.add_argument("--format", choices=["json", "text"], default="json", dest="output_format")
    s.add_argument("--score-table", type=Path)
    s.add_argument("--controllability-table", type=Path)
    s.add_argument("--fixtures", type=Path, help="replay recorded responses; never touches the network")
    s.add_argument("--record", type=Path, help="query live and save responses as fixtures here")
    s.add_argument("--cache-dir", type=Path)
    s.add_argument("--api-url", default="https://api.github.com")
    s.add_argument("--no-timestamp", action="store_true")
    s.add_argument("--parallelism", type=int, default=os.cpu_count() or 1)
    s.add_argument("--max-in-flight", type=int, default=8)
    s.add_argument("--repos", type=Path, help="repository list; same as --mode repos --input FILE")

    t = sub.add_parser("score-table", help="print the effective event exploitability table")
    t.add_argument("--score-table", type=Path)
    return parser


def _forge_config(args: argparse.Namespace) -> ForgeConfig:
    if args.fixtures and args.record:
        raise ConfigError("--fixtures and --record are mutually exclusive")
    config = ForgeConfig.from_env(api_base_url=args.api_url, cache_dir=args.cache_dir,
                                  max_in_flight=max(1, args.max_in_flight))
    if args.fixtures:
        config.mode, config.fixtures_dir = Mode.RECORDED, args.fixtures
    elif args.record:
        config.mode, config.fixtures_dir = Mode.RECORD_WHILE_LIVE, args.record
        config.cache_dir = args.record
    return config


def _run_scan(args: argparse.Namespace) -> int:
    mode = InputMode(args.mode)
    input_path = args.input
    if args.repos:
        mode, input_path = InputMode.REPOS, args.repos
    config = ScanConfig(
        input_path=input_path,
        mode=mode,
        forge=_forge_config(args),
        max_depth=args.max_depth,
        score_table_path=args.score_table,
        controllability_table_path=args.controllability_table,
        output=args.output,
        output_format=args.output_format,
        parallelism=args.parallelism,
        timestamp=not args.no_timestamp,
    )
    report = scan(config)
    if config.output_format == "json":
        target = config.output or Path("report.json")
        target.write_text(report.to_json(), encoding="utf-8")
        sys.stderr.write(render_human(report))
    else:
        text = render_human(report)
        if config.output:
            config.output.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return report.exit_code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "score-table":
            sys.stdout.write(format_score_table(load_score_table(args.score_table)))
            return 0
        return _run_scan(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"wfaudit: error: {exc}\n")
        return EXIT_ERROR
    except WfauditError as exc:
        sys.stderr.write(f"wfaudit: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
