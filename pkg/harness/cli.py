"""
Command-line entry point.

    python -m harness.cli simulate --config run.json --out data/
    python -m harness.cli reconstruct --config run.json --data data/ --out recon/ [--truth data/truth.grid]
    python -m harness.cli validate --truth data/truth.grid --estimate recon/estimate.grid --report report.txt
    python -m harness.cli check-curve --config run.json [--report kt.txt]
    python -m harness.cli selftest [--full]
"""
import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from errors import InvalidInputError
from harness.config import load_config, validate_config
from harness.pipeline import RunPipeline, validate_files
from harness.selftest import selftest_suite

TRT_LOG_LEVEL = os.getenv("TRT_LOG_LEVEL", "INFO")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trt", description="Restricted transverse ray transform toolkit")
    parser.add_argument("--log-level", default=TRT_LOG_LEVEL, help="logging level (default from TRT_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="rasterize the phantom and acquire curve data")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out", help="output directory (default: output_dir of the config)")

    reconstruct = sub.add_parser("reconstruct", help="reconstruct from an acquired dataset")
    reconstruct.add_argument("--config", required=True)
    reconstruct.add_argument("--data", required=True, help="directory written by simulate")
    reconstruct.add_argument("--out", help="output directory (default: output_dir of the config)")
    reconstruct.add_argument("--truth", help="truth grid; writes per-probe errors")

    validate = sub.add_parser("validate", help="compare an estimate against the truth")
    validate.add_argument("--truth", required=True)
    validate.add_argument("--estimate", required=True)
    validate.add_argument("--report", required=True)

    check = sub.add_parser("check-curve", help="certify the acquisition curve")
    check.add_argument("--config", required=True)
    check.add_argument("--report")

    selftest = sub.add_parser("selftest", help="run the identity self-tests")
    selftest.add_argument("--full", action="store_true", help="include the end-to-end reconstruction")
    selftest.add_argument("--report")
    return parser


def _out_dir(args, config) -> str:
    out = args.out or config.output_dir
    if not out:
        raise InvalidInputError("No output directory: pass --out or set output_dir in the config")
    return out


def _load(path: str):
    config = load_config(path)
    validate_config(config)
    return config


def _finish(success: bool, message: str) -> int:
    if success:
        logger.info(f"[CLI] {message}")
        return EXIT_OK
    logger.error(f"[CLI] {message}")
    return EXIT_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="[%(asctime)s] [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    if args.command == "selftest":
        report = selftest_suite("full" if args.full else "quick")
        sys.stdout.write(report.to_text())
        if args.report:
            with open(args.report, "w") as fh:
                fh.write(report.to_text())
        return EXIT_OK if report.passed else EXIT_FAILED

    if args.command == "validate":
        success, message, _ = validate_files(args.truth, args.estimate, args.report)
        return _finish(success, message)

    try:
        config = _load(args.config)
        pipeline = RunPipeline(config)
        if args.command == "simulate":
            success, message, _ = pipeline.simulate(_out_dir(args, config))
        elif args.command == "reconstruct":
            success, message, _ = pipeline.reconstruct(args.data, _out_dir(args, config), args.truth)
        else:
            success, message, payload = pipeline.check_curve(args.report)
            if payload is not None:
                sys.stdout.write(payload["text"])
    except InvalidInputError as e:
        logger.error(f"[CLI] Invalid configuration: {e}")
        return EXIT_CONFIG
    return _finish(success, message)


if __name__ == "__main__":
    sys.exit(main())
