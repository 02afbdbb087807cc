"""Command-line entry point for the board server.

Two modes share one binary: the default starts the live server, and
``--replay`` runs a scripted session deterministically, prints the report,
and exits without opening a port.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import BoardError
from .replay import load_script, run_replay
from .server import ServerConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="board-server",
        description="Realtime shared-whiteboard server with an AI facilitation layer.",
    )
    parser.add_argument("--port", type=int, default=8787, help="TCP port to listen on")
    parser.add_argument(
        "--data-dir", type=Path, default=Path("data"), help="directory for named snapshots"
    )
    parser.add_argument(
        "--mock-fixtures",
        type=Path,
        default=None,
        metavar="DIR",
        help="serve canned AI responses from this fixture directory instead of a live model",
    )
    parser.add_argument(
        "--hint-interval-ms",
        type=int,
        default=None,
        metavar="MS",
        help="override the periodic relation-hint interval",
    )
    parser.add_argument(
        "--replay",
        type=Path,
        default=None,
        metavar="SCRIPT",
        help="run this session script against mock fixtures, print the report, and exit",
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
        help="logging verbosity",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    config = ServerConfig(
        port=args.port,
        data_dir=args.data_dir,
        mock_fixtures=args.mock_fixtures,
        hint_interval_ms=args.hint_interval_ms,
        log_level=args.log_level,
    )
    try:
        if args.replay is not None:
            return _run_replay(args.replay, config)
        serve(config)
        return 0
    except KeyboardInterrupt:
        return 0
    except BoardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _run_replay(script_path: Path, config: ServerConfig) -> int:
    if config.mock_fixtures is None:
        print("error: --replay needs --mock-fixtures for deterministic responses", file=sys.stderr)
        return 2
    script = load_script(script_path)
    report = run_replay(script, config.mock_fixtures, hint_interval_ms=config.hint_interval_ms)
    print(report.render())
    violations = report.violations()
    if violations:
        for name, items in sorted(violations.items()):
            for line in items:
                print(f"violation [{name}]: {line}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
