"""Workflows behind the command line: check, compose, export and list.

Each returns a :class:`Report` whose ``status`` is the process exit code:
0 when every expectation is met, 1 on a mismatch, 2 on a usage problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FsPath
from typing import Mapping

from ..composer import GlobalRule, check_slot, compose_global_rule
from ..kts import Kts, explore, to_dot
from ..logic.checker import Verdict, check_quantified
from ..terms import MatchFailure
from .dsl import SpecDocument, load_spec, render_spec

log = logging.getLogger(__name__)

OK, MISMATCH, USAGE = 0, 1, 2
FIXTURES = ("agreement", "visitors", "quicdoc")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Report:
    lines: tuple[str, ...]
    status: int

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath("fixtures", f"{name}.alspec").read_text(encoding="utf-8")


def read_spec(spec: str, params: Mapping[str, int] | None = None) -> SpecDocument:
    """Load ``spec``, which is a file path or the name of an embedded fixture."""
    path = FsPath(spec)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    elif spec in FIXTURES:
        text = fixture_text(spec)
    else:
        raise UsageError(f"no spec file {spec!r}; embedded fixtures are {', '.join(FIXTURES)}")
    return load_spec(text, params)


_KTS_CACHE: dict[str, Kts] = {}


def explore_spec(doc: SpecDocument) -> Kts:
    """Explore the global rules from the initial state, cached per spec text and parameters."""
    key = render_spec(doc)
    if key not in _KTS_CACHE:
        rules = doc.global_rules()
        initial = doc.initial_state()
        if not rules or initial is None:
            raise UsageError(f"spec {doc.name} has no global rules and initial state to explore")
        _KTS_CACHE[key] = explore(rules, initial, doc.typed_variables(), interpreted=doc.interpreted_symbols)
    return _KTS_CACHE[key]


def evaluate_formula(doc: SpecDocument, kts: Kts, name: str) -> Verdict:
    decl = doc.formula(name)
    return check_quantified(kts, decl.formula, doc.constants, domains=doc.domain_values(), mode=decl.mode)


def _indent(text: str) -> list[str]:
    return ["  " + ln for ln in text.splitlines()]


def run_check(doc: SpecDocument, formula: str | None = None) -> Report:
    """Evaluate the named formula (or all of them) and every slot assertion."""
    lines: list[str] = []
    status = OK
    names = [f.name for f in doc.formulas]
    if formula is not None:
        if formula not in names:
            raise UsageError(f"no formula {formula!r}; formulae are {', '.join(names) or 'none'}")
        names = [formula]
    if names:
        kts = explore_spec(doc)
        lines.append(kts.summary())
        display = doc.display_map
        for name in names:
            decl = doc.formula(name)
            verdict = evaluate_formula(doc, kts, name)
            outcome = "holds" if verdict.holds else "fails"
            met = decl.expect is None or decl.expect == outcome
            if not met:
                status = MISMATCH
            expectation = f" (expected {decl.expect})" if decl.expect else ""
            lines.append(f"formula {name}: {outcome.upper()}{expectation} {'ok' if met else 'MISMATCH'}")
            lines += _indent(verdict.render(display))
    if formula is None and doc.assertions:
        report = _run_assertions(doc, [a.command for a in doc.assertions])
        lines += report.lines
        status = max(status, report.status)
    return Report(tuple(lines), status)


def compose_command(doc: SpecDocument, command: str) -> list[GlobalRule]:
    clients = [r for r in doc.side_rules("client") if r.command == command]
    servers = [r for r in doc.side_rules("server") if r.command == command]
    if not clients or not servers:
        available = sorted({r.command for r in doc.side_rules("client")} & {r.command for r in doc.side_rules("server")})
        raise UsageError(f"no client and server rules for {command!r}; commands are {', '.join(available) or 'none'}")
    rules = []
    for c in clients:
        for s in servers:
            try:
                rules.append(compose_global_rule(c, s))
            except MatchFailure as e:
                log.info("rules %s and %s do not pair: %s", c.name, s.name, e)
    return rules


def _run_assertions(doc: SpecDocument, commands) -> Report:
    lines, status = [], OK
    abbreviations = doc.abbreviation_map()
    composed: dict[str, list[GlobalRule]] = {}
    for a in doc.assertions:
        if a.command not in commands:
            continue
        if a.command not in composed:
            composed[a.command] = compose_command(doc, a.command)
        for rule in composed[a.command]:
            verdict = check_slot(rule, a.side, a.field_name, a.expected, abbreviations)
            outcome = "holds" if verdict.holds else "fails"
            met = outcome == a.expect
            if not met:
                status = MISMATCH
            lines.append(f"assert {a.name}: {outcome.upper()} (expected {a.expect}) {'ok' if met else 'MISMATCH'}")
            lines.append(f"  {verdict}")
    return Report(tuple(lines), status)


def run_compose(doc: SpecDocument, command: str) -> Report:
    lines = []
    abbreviations = doc.abbreviation_map()
    for rule in compose_command(doc, command):
        lines.append(f"{rule.client_rule.name} with {rule.server_rule.name}:")
        lines.append(f"  sigma_request  = {rule.sigma_request}")
        lines.append(f"  sigma_response = {rule.sigma_response}")
        lines.append(f"  {rule.render(abbreviations)}")
    report = _run_assertions(doc, [command])
    return Report(tuple(lines) + report.lines, report.status)


def run_export(doc: SpecDocument, out: str | None = None) -> Report:
    kts = explore_spec(doc)
    if out is not None:
        FsPath(out).write_text(to_dot(kts, doc.name or "kts", doc.display_map), encoding="utf-8")
    return Report((kts.summary(),), OK)


def run_list(doc: SpecDocument) -> Report:
    lines = [f"spec {doc.name}"]
    if doc.params:
        lines.append("params: " + ", ".join(f"{n}={v}" for n, v in doc.params))
    rules = doc.concrete_rules()
    lines.append(f"rules: {len(doc.rules)} declared, {len(rules)} after expansion")
    lines += [f"  {r.name} [{r.side}]" for r in rules]
    commands = sorted({r.command for r in doc.side_rules("client")} & {r.command for r in doc.side_rules("server")})
    if commands:
        lines.append("commands: " + ", ".join(commands))
    if doc.formulas:
        lines.append("formulae:")
        lines += [f"  {f.name}" + (f" (expect {f.expect})" if f.expect else "") for f in doc.formulas]
    if doc.assertions:
        lines.append("assertions:")
        lines += [f"  {a.name} (expect {a.expect})" for a in doc.assertions]
    return Report(tuple(lines), OK)
