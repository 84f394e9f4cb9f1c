"""Command line entry point.

    radclass run        --config cfg.yaml --out results/
    radclass extract    ...   (then lda-cv, nrs-sweep, evaluate)
    radclass print-config

Exit codes: 0 success, 1 runtime or data error, 2 configuration error.
Failures print a single JSON line to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .errors import ConfigError, MissingArtifact, RadclassError

STAGES = {
    "extract": lambda cfg, out, threads: pipeline.run_extract(cfg, out, threads),
    "lda-cv": lambda cfg, out, threads: pipeline.run_lda_cv(cfg, out),
    "nrs-sweep": lambda cfg, out, threads: pipeline.run_nrs_sweep(cfg, out),
    "evaluate": lambda cfg, out, threads: pipeline.run_evaluate(cfg, out),
    "run": lambda cfg, out, threads: pipeline.run_pipeline(cfg, out, threads),
}


def _delta_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


class _Parser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they share the one-line, exit-2 path."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", help="output directory (overrides config 'output')")
    common.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    common.add_argument("--threads", type=int, default=0, help="feature workers, 0 = all cores")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="radclass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="full pipeline")
    sub.add_parser("extract", parents=[common], help="compute features.csv")
    sub.add_parser("lda-cv", parents=[common], help="LDA cross-validation, projection, class merge")
    p = sub.add_parser("nrs-sweep", parents=[common], help="rough-set importance sweep and reducts")
    p.add_argument("--delta-grid", type=_delta_grid, help="comma-separated radii, e.g. 0.1,0.2")
    sub.add_parser("evaluate", parents=[common], help="reclassify with the stable reduct")
    sub.add_parser("print-config", parents=[common], help="print the resolved configuration")
    return parser


def _fail(code: int, exc: BaseException, command: str) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, MissingArtifact):
        doc["path"] = str(exc.path)
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        return _fail(2, exc, "parse")

    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "delta_grid", None):
        overrides["nrs"] = {"delta_grid": args.delta_grid}
    try:
        cfg = pipeline.load_config(args.config, overrides)
    except ConfigError as exc:
        return _fail(2, exc, args.command)

    if args.command == "print-config":
        sys.stdout.write(pipeline.dump_config(cfg))
        return 0

    out = args.out or cfg["output"]
    try:
        STAGES[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        return _fail(2, exc, args.command)
    except (RadclassError, OSError, ValueError) as exc:
        logging.getLogger("radclass").debug("stage failed", exc_info=True)
        return _fail(1, exc, args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
