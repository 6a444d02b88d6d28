import argparse
import logging
import sys

from app.cli import commands
from app.core.config import settings
from app.core.errors import ShdsError
from app.core.logger import configure_logging

logger = logging.getLogger(__name__)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help=f"worker threads (default {settings.THREADS})")
    common.add_argument("--modulus", default=None, help="irreducible modulus digits, constant term first, e.g. 2,2,1")
    common.add_argument("--seed", type=int, default=None, help=f"seed for sampled modes (default {settings.SEED})")
    common.add_argument("--no-cache", action="store_true", help="recompute distributions even if cached")
    common.add_argument("--log-level", default=None, help=f"logging level (default {settings.LOG_LEVEL})")
    common.add_argument("--out", default=None, help="write the report (or set file) here instead of stdout")
    return common


def _family_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", default=None, help="paley, dy1, dy-1, d7, d7:<u>, image:<e1>+<e2>, set:<path>")
    parser.add_argument("--u", default=None, help='u expression for d7, e.g. "1", "-1", "g^3"')
    parser.add_argument("--set", default=None, help="set file to use instead of a family")
    parser.add_argument("--as", dest="as_mode", choices=("shds", "pds"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description=f"{settings.PROJECT_NAME}: skew Hadamard difference sets from Dickson polynomials over GF(3^m)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()

    p = sub.add_parser("construct", parents=[common], help="build a set and write it as a set file")
    _family_flags(p)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(handler=commands.cmd_construct)

    p = sub.add_parser("verify", parents=[common], help="check skew / ds / pds / lemma3 / eq4 / norm")
    _family_flags(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--checks", default="skew,ds")
    p.set_defaults(handler=commands.cmd_verify)

    p = sub.add_parser("invariants", parents=[common], help="triple intersection number statistics")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--families", required=True, help="comma separated family tokens")
    p.add_argument("--stat", choices=("dist", "minmax"), default="dist")
    p.add_argument("--convention", choices=("unordered_distinct", "ordered_distinct"), default=None)
    p.add_argument("--compare", action="store_true")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=commands.cmd_invariants)

    p = sub.add_parser("appendix", parents=[common], help="digit-weight inequalities and carry lemmas")
    p.add_argument("theorem", choices=("goal41", "goal42", "carry-bounds", "goal41-carries"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--mode", choices=("full", "sampled"), default="full")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(handler=commands.cmd_appendix)

    p = sub.add_parser("scan", parents=[common], help="permutation / skew / ds / pds / planarity table")
    p.add_argument("--orders", required=True, help="comma separated Dickson orders")
    p.add_argument("--m", required=True, help="comma separated extension degrees")
    p.add_argument("--u", default="1", help="comma separated u expressions")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=commands.cmd_scan)

    p = sub.add_parser("calibrate", parents=[common], help="pin the pair convention and DY labels on m = 5")
    p.set_defaults(handler=commands.cmd_calibrate)

    p = sub.add_parser("charsum", parents=[common], help="exact character sum checks")
    _family_flags(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--checks", default="norm,lemma3")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(handler=commands.cmd_charsum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ShdsError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
