"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import STAGES, load_config
from .errors import ConfigError, DataError, DimensionError, NumericError
from .pipeline import StageError, execute, load_data

log = logging.getLogger("geoaudit")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

SUBCOMMAND_STAGES = {
    "audit": ("audit",),
    "sweep": ("sweep",),
    "stress": ("stress",),
    "baselines": ("baselines",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest-check": "load and encode the data, print a summary",
        "audit": "train the linear probe and write audit.json",
        "sweep": "capacity sweep on baseline and pruned data",
        "stress": "counterfactual stress suite on the final models",
        "baselines": "L1 probe, JTT and cost comparison",
        "run": "full pipeline (stages from the config unless --stage is given)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, help="override the training seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--stage", action="append", choices=STAGES,
                       help="restrict to this stage (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, DimensionError, OSError, KeyError, ValueError)):
        return EXIT_DATA
    raise exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    stages = args.stage or SUBCOMMAND_STAGES.get(args.command)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out, stages=stages)
    except ConfigError as exc:
        print(f"geoaudit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "ingest-check":
        try:
            data = load_data(cfg)
        except Exception as exc:
            code = _exit_code(exc)
            print(f"geoaudit: stage 'ingest' failed: {exc}", file=sys.stderr)
            return code
        summary = {
            "train_rows": data.train.n_rows,
            "test_rows": data.test.n_rows,
            "features": list(data.train.feature_names),
            "train_positive_rate": round(float(data.train.targets.mean()), 6),
        }
        print(json.dumps(summary, indent=2))
        return 0

    try:
        result = execute(cfg)
    except StageError as exc:
        code = _exit_code(exc.cause)
        print(f"geoaudit: {exc}", file=sys.stderr)
        return code
    print(f"wrote {len(result.manifest.files)} files to {cfg.output_dir}")
    if result.audit is not None:
        print(f"flagged shortcuts: {', '.join(result.audit.flagged) or '(none)'}")
    return 0
