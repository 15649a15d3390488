from typing import List, Optional
from pathlib import Path
import argparse
import json
import logging
import sys

from crossdiff.cli_io.config import Command, parse_config
from crossdiff.cli_io.runner import run
from crossdiff.errors import CrossDiffError, OutputError


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger("crossdiff.cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdiff",
        description="Predator-prey cross-diffusion simulations, limits and Turing analysis",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for command in Command:
        sub = commands.add_parser(command.value, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        sub.add_argument("--out", default=Path("."), type=Path, help="output directory")
        sub.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return parser


def report_error(exc: CrossDiffError) -> int:
    """Write one JSON error record to stderr and return the exit code"""
    record = {"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}
    sys.stderr.write(json.dumps(record) + "\n")
    return exc.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command, return the process exit code"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format=LOG_FORMAT, force=True)

    try:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot read config {args.config}: {exc}") from exc
        cfg = parse_config(text, args.command)
        cfg = cfg.model_copy(update={"output_dir": str(args.out)})
        bundle = run(cfg)
    except CrossDiffError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return report_error(exc)

    logger.info("wrote %d artifacts to %s", len(bundle.artifacts), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
