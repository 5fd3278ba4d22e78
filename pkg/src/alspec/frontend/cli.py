"""``alspec`` command line."""

from __future__ import annotations

import argparse
import logging
import sys

from ..kts import LimitExceeded, SymbolicSymbol
from ..lexing import ParseError
from ..logic.checker import TypeMismatch, UnboundConstant, UnboundedQuantifierDomain, UnknownVariable, UnsupportedFragment
from .dsl import SpecError
from .runner import USAGE, UsageError, read_spec, run_check, run_compose, run_export, run_list


def _param(text: str) -> tuple[str, int]:
    name, sep, value = text.partition("=")
    if not sep or not value.strip().isdigit():
        raise argparse.ArgumentTypeError(f"expected NAME=INT, got {text!r}")
    return name.strip(), int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alspec", description="Check application layer specifications.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_spec(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="spec file, or one of the embedded fixtures")
        p.add_argument("--param", action="append", type=_param, default=[], metavar="K=V",
                       help="override a parameter")
        return p

    check = with_spec("check", "explore and evaluate formulae and slot assertions")
    check.add_argument("--formula", help="evaluate only this formula")
    compose = with_spec("compose", "compose client and server rules for a command")
    compose.add_argument("--command", required=True, dest="rule_command")
    export = with_spec("export", "explore and write the transition system")
    export.add_argument("--dot", metavar="OUT", help="write Graphviz DOT to OUT")
    with_spec("list", "list rules, formulae and assertions")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        doc = read_spec(args.spec, dict(args.param))
        match args.command:
            case "check":
                report = run_check(doc, args.formula)
            case "compose":
                report = run_compose(doc, args.rule_command)
            case "export":
                report = run_export(doc, args.dot)
            case _:
                report = run_list(doc)
    except (UsageError, ParseError, SpecError, OSError) as e:
        print(f"alspec: {e}", file=sys.stderr)
        return USAGE
    except (LimitExceeded, SymbolicSymbol, UnboundConstant, UnknownVariable, TypeMismatch,
            UnboundedQuantifierDomain, UnsupportedFragment) as e:
        print(f"alspec: {type(e).__name__}: {e}", file=sys.stderr)
        return USAGE
    sys.stdout.write(report.text)
    return report.status


if __name__ == "__main__":
    sys.exit(main())
