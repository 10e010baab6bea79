from typing import List, Optional
from contextlib import ExitStack
from pathlib import Path
import argparse
import logging
import os
import sys

from . import cli
from .errors import QcmolError
from .gram_cache import GramCache
from .ledger import Ledger
from .manifest import read_manifest

log = logging.getLogger("qcmol")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _policy_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--p-identity", type=float, default=0.2)
    parser.add_argument("--p-rz", type=float, default=0.5)
    parser.add_argument("--p-cnot", type=float, default=0.3)
    parser.add_argument("--delta-max", type=int, default=None)


def _descriptor_flags(parser: argparse.ArgumentParser, recorded: bool):
    default = cli.DescriptorSettings()
    parser.add_argument("--max-path-len", type=int,
                        default=None if recorded else default.max_path_len)
    parser.add_argument("--width", type=int,
                        default=None if recorded else default.width)
    parser.add_argument("--bond-scale", type=float,
                        default=None if recorded else
                        default.layout.bond_scale)
    parser.add_argument("--layout-seed", type=int,
                        default=None if recorded else default.layout_seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcmol")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("QCMOL_WORKERS", "1")))
    parser.add_argument("--ledger", type=Path,
                        default=os.environ.get("QCMOL_LEDGER"))
    parser.add_argument("--cache", type=Path,
                        default=os.environ.get("QCMOL_CACHE",
                                               "./data/cache/gram"))
    parser.add_argument("--no-cache", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample random circuit grids")
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extend-from", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    _policy_flags(p)
    p.set_defaults(func=cli.cmd_generate)

    p = sub.add_parser("describe", help="Gershgorin radii and PCA scores")
    p.add_argument("--circuits", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _descriptor_flags(p, recorded=False)
    p.set_defaults(func=cli.cmd_describe)

    p = sub.add_parser("evaluate", help="optimize and score quantum kernels")
    p.add_argument("--circuits", type=Path, required=True)
    p.add_argument("--dataset", default="hm4")
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--bo-budget", type=int, default=20)
    p.add_argument("--bo-init", type=int, default=5)
    p.add_argument("--bo-pool", type=int, default=512)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--svm-tol", type=float, default=1e-3)
    p.add_argument("--margin", type=float, default=0.10)
    p.add_argument("--margin-mode", choices=["absolute", "relative"],
                   default="absolute")
    p.add_argument("--reference-evaluated", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cli.cmd_evaluate)

    p = sub.add_parser("search", help="select circuits by descriptors")
    p.add_argument("--described", type=Path, default=None)
    p.add_argument("--evaluated", type=Path, default=None)
    p.add_argument("--mode", choices=["quadrant", "top", "fresh"],
                   default="quadrant")
    p.add_argument("--quadrant", choices=["high", "low"], default="high")
    p.add_argument("--sample", type=int, default=100)
    p.add_argument("--reference-sample", type=int, default=None)
    p.add_argument("--r-min-threshold", type=float, default=None)
    p.add_argument("--r-max-threshold", type=float, default=None)
    p.add_argument("--max-draws", type=int, default=10000)
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    _policy_flags(p)
    _descriptor_flags(p, recorded=True)
    p.set_defaults(func=cli.cmd_search)

    p = sub.add_parser("enrich", help="compare two evaluated batches")
    p.add_argument("--high", type=Path, required=True)
    p.add_argument("--low", type=Path, required=True)
    p.add_argument("--high-rule", default="high")
    p.add_argument("--low-rule", default="low")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cli.cmd_enrich)

    p = sub.add_parser("report", help="PCA scatter and KDE tables")
    p.add_argument("--described", type=Path, required=True)
    p.add_argument("--evaluated", type=Path, required=True)
    p.add_argument("--kde-column", choices=["r_min", "r_max"],
                   default="r_min")
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cli.cmd_report)

    p = sub.add_parser("transfer", help="compare two circuit depths")
    p.add_argument("--described5", type=Path, required=True)
    p.add_argument("--evaluated5", type=Path, required=True)
    p.add_argument("--described8", type=Path, required=True)
    p.add_argument("--evaluated8", type=Path, required=True)
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cli.cmd_transfer)

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest", type=Path)
    return parser


def _configure_logging(verbose: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "rerun":
            manifest = read_manifest(args.manifest)
            log.info("rerunning %s from %s", manifest.command, args.manifest)
            return main(manifest.argv)
        if args.workers < 1:
            parser.error(f"--workers must be >= 1, got {args.workers}")
        with ExitStack() as stack:
            ctx = cli.RunContext(argv=argv, workers=args.workers,
                                 verbose=args.verbose > 0)
            if args.command == "evaluate" and not args.no_cache:
                ctx.cache = stack.enter_context(
                    GramCache(args.cache.expanduser()))
            if args.ledger is not None:
                ctx.ledger = stack.enter_context(
                    Ledger(args.ledger.expanduser()))
            return args.func(args, ctx)
    except QcmolError as e:
        log.error("%s", e)
        print(f"qcmol: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"qcmol: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
