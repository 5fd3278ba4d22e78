"""Loader for ``.alspec`` application specifications.

A spec is a sequence of keyword-introduced statements, one per line; an
indented line continues the statement above it and ``#`` starts a comment::

    spec visitors
    param N = 3
    urls U
    domain addr = A[1..N]
    state server (a: set addr, n: nat)
    interpret union +
    init server ({}, 0)
    schema first_visit (Ai in addr) : (a, n) --[ U, Ai / B(n+1) ]--> (union(a, {Ai}), n+1) if Ai notin a
    formula counter_bound : AG(n <= N) expect holds

Statements:

``spec NAME``
    Names the application.
``param NAME = INT``
    A global constant that the caller may override.
``global NAME[, NAME...]``
    Global constants a formula may use once quantified.
``cookies``, ``urls``, ``consts``, ``functions``
    Comma-separated declarations of cookies, request URLs or commands,
    further constants and uninterpreted function symbols.
``bodies``
    Response bodies; ``B(n)`` declares a body constructor of arity one.
``domain NAME = {A1, A2}`` or ``domain NAME = A[1..N]``
    A finite set of constants for schema parameters and quantifiers.
``interpret SYMBOL...``
    Function symbols that are evaluated: ``+`` and ``union``.
``display NAME = "TEXT"``
    How a constant is shown in reports and DOT output.
``state browser VAR``, ``state client NAME(FIELD, ...)``, ``state server NAME(FIELD: TYPE, ...)``
    The state components.  Typed fields (``nat``, ``set DOMAIN`` or a
    domain name) become the variables formulae talk about.
``init [COMPONENT] PART``
    Initial value of a component.
``rule NAME [side client|server] : FROM --[ REQUEST / RESPONSE ]--> TO [if COND, ...]``
    With a browser component the request starts with the cookie store and
    the response with the signed cookies (``{+c1}``).  ``|`` separates
    alternatives for the store or the URL and ``...`` stands for the store
    echoed in the request (or, on the right, that store amended by the
    signed cookies).  Conditions are ``t in u``, ``t notin u`` and ``t != u``.
``schema NAME (P in DOMAIN, ...) ...``
    A rule instantiated once per parameter assignment.
``formula NAME [sat] : FORMULA [expect holds|fails]``
    Checked at the initial state, or with ``sat`` at any reachable state.
``abbrev SHORT = TERM``
    A display abbreviation for composed rules.
``assert NAME : COMMAND client|server.FIELD = TERM [expect holds|fails]``
    Expected slot of the global rule composed for ``COMMAND``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..http_model import (
    DEFAULT_INTERPRETED,
    GlobalState,
    Membership,
    NonMembership,
    NotEpsilon,
    NotEqual,
    Request,
    Response,
    RuleSchema,
    SignedCookieSet,
    StateTuple,
    TransitionRule,
    amend_cookie_store,
    instantiate_schema,
    render_store,
)
from ..kts import TypedVariable, VarType
from ..lexing import ParseError, TokenStream
from ..logic.parser import parse_formula
from ..logic.syntax import (
    AlwaysInvariant,
    And,
    EqSucc,
    EqValue,
    EqVars,
    ExistsPath,
    LeqGlobal,
    Lift,
    Lit,
    Not,
    QuantifiedFormula,
    Ref,
    render_formula,
)
from ..terms import EPS, SET, SUCC, Comp, Const, Term, Var, default_is_constant, read_term, render

COMPONENTS = ("browser", "client", "server")
ELLIPSIS = "..."


class ValidationError(Exception):
    def __init__(self, message: str, line: int = 0):
        self.message = message
        self.line = line
        super().__init__(f"{line}: {message}" if line else message)


class SpecError(Exception):
    """Every problem found while loading a spec."""

    def __init__(self, errors: list[Exception]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class DomainDecl:
    name: str
    values: tuple[str, ...] = ()  # explicit members
    prefix: str = ""  # or PREFIX[lo..hi]
    lo: int = 0
    hi: str = ""  # numeral or parameter name

    def render(self) -> str:
        if self.prefix:
            return f"domain {self.name} = {self.prefix}[{self.lo}..{self.hi}]"
        return f"domain {self.name} = {{{', '.join(self.values)}}}"


@dataclass(frozen=True)
class StateDecl:
    component: str
    name: str  # tuple name, or the variable name of the browser store
    fields: tuple[tuple[str, str | None], ...] = ()

    def render(self) -> str:
        if self.component == "browser":
            return f"state browser {self.name}"
        parts = [f if t is None else f"{f}: {t}" for f, t in self.fields]
        return f"state {self.component} {self.name}({', '.join(parts)})"


@dataclass(frozen=True)
class RuleDecl:
    name: str
    side: str
    parameters: tuple[tuple[str, str], ...]
    source: tuple  # one part per component: frozenset, StateTuple or ELLIPSIS
    cookie_alts: tuple[frozenset, ...] | None
    url_alts: tuple[str, ...]
    extras: tuple[Term, ...]
    signed: SignedCookieSet | None
    body: tuple[Term, ...]
    target: tuple
    conditions: tuple
    line: int = field(default=0, compare=False)

    def render(self) -> str:
        head = f"schema {self.name} ({', '.join(f'{p} in {d}' for p, d in self.parameters)})" \
            if self.parameters else f"rule {self.name}"
        if self.side != "global":
            head += f" side {self.side}"
        req = []
        if self.cookie_alts is not None:
            req.append(" | ".join(render_store(c) for c in self.cookie_alts))
        req.append(" | ".join(self.url_alts))
        req += [render(t) for t in self.extras]
        resp = []
        if self.signed is not None:
            resp.append(str(self.signed))
        resp += [render(t) for t in self.body]
        text = (f"{head} : {_render_parts(self.source)} --[ {', '.join(req)} / {', '.join(resp)} ]--> "
                f"{_render_parts(self.target)}")
        if self.conditions:
            text += " if " + ", ".join(_render_condition(c) for c in self.conditions)
        return text


@dataclass(frozen=True)
class FormulaDecl:
    name: str
    formula: QuantifiedFormula
    mode: str = "initial"
    expect: str | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AssertionDecl:
    name: str
    command: str
    side: str
    field_name: str
    expected: Term
    expect: str = "holds"
    line: int = field(default=0, compare=False)

    def render(self) -> str:
        return (f"assert {self.name} : {self.command} {self.side}.{self.field_name} = {render(self.expected)}"
                f" expect {self.expect}")


def _render_parts(parts) -> str:
    out = []
    for p in parts:
        if p == ELLIPSIS:
            out.append(ELLIPSIS)
        elif isinstance(p, frozenset):
            out.append(render_store(p))
        else:
            out.append(p.render())
    return "; ".join(out)


def _render_condition(c) -> str:
    match c:
        case Membership(a, b):
            return f"{render(a)} in {render(b)}"
        case NonMembership(a, b):
            return f"{render(a)} notin {render(b)}"
        case NotEpsilon(v):
            return f"{render(v)} != eps"
        case NotEqual(a, b):
            return f"{render(a)} != {render(b)}"
    raise TypeError(c)


# -- the document --------------------------------------------------------------

@dataclass(frozen=True)
class SpecDocument:
    name: str = ""
    params: tuple[tuple[str, int], ...] = ()
    globals: tuple[str, ...] = ()
    cookies: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()
    bodies: tuple[str, ...] = ()
    consts: tuple[str, ...] = ()
    functions: tuple[str, ...] = ()
    domains: tuple[DomainDecl, ...] = ()
    interpreted: tuple[str, ...] | None = None
    display: tuple[tuple[str, str], ...] = ()
    states: tuple[StateDecl, ...] = ()
    inits: tuple[tuple[str, object], ...] = ()
    rules: tuple[RuleDecl, ...] = ()
    formulas: tuple[FormulaDecl, ...] = ()
    abbreviations: tuple[tuple[Term, Term], ...] = ()
    assertions: tuple[AssertionDecl, ...] = ()

    # -- derived views --

    @property
    def constants(self) -> dict[str, int]:
        return dict(self.params)

    def domain_values(self) -> dict[str, tuple[str, ...]]:
        out = {}
        for d in self.domains:
            if d.prefix:
                hi = int(d.hi) if d.hi.isdigit() else self.constants[d.hi]
                out[d.name] = tuple(f"{d.prefix}{i}" for i in range(d.lo, hi + 1))
            else:
                out[d.name] = d.values
        return out

    @property
    def interpreted_symbols(self) -> frozenset[str]:
        return DEFAULT_INTERPRETED if self.interpreted is None else frozenset(self.interpreted)

    @property
    def display_map(self) -> dict[str, str]:
        return dict(self.display)

    @property
    def components(self) -> tuple[str, ...]:
        present = {s.component for s in self.states}
        return tuple(c for c in COMPONENTS if c in present)

    def state_decl(self, component: str) -> StateDecl | None:
        return next((s for s in self.states if s.component == component), None)

    def typed_variables(self) -> tuple[TypedVariable, ...]:
        domains = self.domain_values()
        out = []
        for s in self.states:
            if s.component == "browser":
                out.append(TypedVariable(s.name, VarType("powerset", self.cookies), "browser"))
                continue
            for i, (fname, tname) in enumerate(s.fields):
                if tname is not None:
                    out.append(TypedVariable(fname, _var_type(tname, domains), s.component, i))
        return tuple(out)

    def shorthand_variable(self) -> str | None:
        sets = [v.name for v in self.typed_variables() if v.type.kind == "powerset"]
        return sets[0] if len(sets) == 1 else None

    def initial_state(self) -> GlobalState | None:
        if not self.inits:
            return None
        parts = dict(self.inits)
        return GlobalState(parts.get("browser"), parts.get("client"), parts.get("server"))

    def concrete_rules(self) -> list[TransitionRule]:
        """Every rule with alternatives expanded and schemas instantiated."""
        domains = self.domain_values()
        out = []
        for decl in self.rules:
            for rule in _expand(decl):
                if decl.parameters:
                    params = tuple((p, tuple(Const(v) for v in domains[d])) for p, d in decl.parameters)
                    out.extend(instantiate_schema(RuleSchema(rule, params)))
                else:
                    out.append(rule)
        return out

    def global_rules(self) -> list[TransitionRule]:
        return [r for r in self.concrete_rules() if r.side == "global"]

    def side_rules(self, side: str) -> list[TransitionRule]:
        return [r for r in self.concrete_rules() if r.side == side]

    def formula(self, name: str) -> FormulaDecl:
        for f in self.formulas:
            if f.name == name:
                return f
        raise KeyError(name)

    def abbreviation_map(self) -> dict[Term, Term]:
        return dict(self.abbreviations)


def _var_type(tname: str, domains: Mapping[str, tuple]) -> VarType:
    words = tname.split()
    if words == ["nat"]:
        return VarType("nat")
    if len(words) == 2 and words[0] == "set":
        return VarType("powerset", domains[words[1]])
    return VarType("enum", domains[words[0]])


def _expand(decl: RuleDecl) -> list[TransitionRule]:
    cookie_alts = decl.cookie_alts if decl.cookie_alts is not None else (None,)
    many = len(cookie_alts) * len(decl.url_alts) > 1
    rules = []
    for store, url in itertools.product(cookie_alts, decl.url_alts):
        signed = decl.signed if decl.signed is not None else SignedCookieSet()
        source = _state_from(decl.side, decl.source, store, None)
        target = _state_from(decl.side, decl.target, store, signed)
        if many:
            tag = ",".join(([render_store(store)] if store is not None else []) + [url])
            name = f"{decl.name}[{tag}]"
        else:
            name = decl.name
        rules.append(TransitionRule(
            name=name,
            source=source,
            request=Request(store if store is not None else frozenset(), url, decl.extras),
            response=Response(signed, decl.body),
            target=target,
            conditions=decl.conditions,
            side=decl.side,
        ))
    return rules


def _state_from(side: str, parts: tuple, store, signed) -> GlobalState:
    values = {}
    for p in parts:
        if p == ELLIPSIS:
            values["browser"] = store if signed is None else amend_cookie_store(store, signed)
        elif isinstance(p, frozenset):
            values["browser"] = p
        else:
            values[p.component] = p.tuple
    return GlobalState(values.get("browser"), values.get("client"), values.get("server"))


@dataclass(frozen=True)
class TuplePart:
    component: str
    tuple: StateTuple

    def render(self) -> str:
        return self.tuple.render()


# -- loading -------------------------------------------------------------------

def split_statements(text: str) -> list[tuple[int, str]]:
    """(first line number, text) per statement; indented lines continue the previous one."""
    out: list[list] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[0] in " \t" and out:
            out[-1][1] += "\n" + raw
        else:
            out.append([number, raw])
    return [(n, t) for n, t in out]


_KEYWORDS = ("spec", "param", "global", "cookies", "urls", "bodies", "consts", "functions", "domain",
             "interpret", "display", "state", "init", "rule", "schema", "formula", "abbrev", "assert")


class _Loader:
    def __init__(self, params: Mapping[str, int] | None):
        self.overrides = dict(params or {})
        self.fields: dict = {k: [] for k in ("params", "globals", "cookies", "urls", "bodies", "consts",
                                             "functions", "domains", "display", "states", "inits", "rules",
                                             "formulas", "abbreviations", "assertions")}
        self.name = ""
        self.interpreted: list[str] | None = None
        self.errors: list[Exception] = []

    # shared helpers

    def doc(self) -> SpecDocument:
        f = self.fields
        return SpecDocument(
            name=self.name, params=tuple(f["params"]), globals=tuple(f["globals"]), cookies=tuple(f["cookies"]),
            urls=tuple(f["urls"]), bodies=tuple(f["bodies"]), consts=tuple(f["consts"]),
            functions=tuple(f["functions"]), domains=tuple(f["domains"]),
            interpreted=None if self.interpreted is None else tuple(self.interpreted),
            display=tuple(f["display"]), states=tuple(f["states"]), inits=tuple(f["inits"]),
            rules=tuple(f["rules"]), formulas=tuple(f["formulas"]), abbreviations=tuple(f["abbreviations"]),
            assertions=tuple(f["assertions"]),
        )

    def is_constant(self, name: str) -> bool:
        if default_is_constant(name):
            return True
        doc = self.doc()
        if name in doc.urls or name in doc.consts:
            return True
        if name in _body_constants(doc.bodies):
            return True
        return any(name in vals for vals in _safe_domains(doc).values())

    def list_of_idents(self, ts: TokenStream) -> list[str]:
        items = [self.ident_or_string(ts)]
        while ts.accept(","):
            items.append(self.ident_or_string(ts))
        ts.expect_end()
        return items

    @staticmethod
    def ident_or_string(ts: TokenStream) -> str:
        tok = ts.peek()
        if tok.kind == "STRING":
            ts.next()
            return tok.text
        return ts.expect_ident().text

    # statements

    def load(self, text: str) -> SpecDocument:
        for line, stmt in split_statements(text):
            try:
                self.statement(line, stmt)
            except (ParseError, ValidationError) as e:
                self.errors.append(e)
        doc = self.doc()
        if not self.errors:
            self.errors.extend(validate(doc))
        if self.errors:
            raise SpecError(self.errors)
        return doc

    def statement(self, line: int, stmt: str) -> None:
        ts = TokenStream.of(stmt, line_offset=line - 1)
        keyword = ts.expect_ident().text
        if keyword not in _KEYWORDS:
            tok = ts.tokens[0]
            raise ParseError(f"unknown statement {keyword!r}", tok.line, tok.column, _KEYWORDS)
        getattr(self, f"st_{keyword}")(ts, line, stmt)

    def st_spec(self, ts, line, stmt):
        self.name = ts.expect_ident().text
        ts.expect_end()

    def st_param(self, ts, line, stmt):
        name = ts.expect_ident().text
        ts.expect("=")
        tok = ts.expect_ident()
        if not tok.text.isdigit():
            raise ParseError("parameter values are natural numbers", tok.line, tok.column)
        ts.expect_end()
        self.fields["params"].append((name, int(self.overrides.get(name, tok.text))))

    def st_global(self, ts, line, stmt):
        self.fields["globals"].extend(self.list_of_idents(ts))

    def st_cookies(self, ts, line, stmt):
        self.fields["cookies"].extend(self.list_of_idents(ts))

    def st_urls(self, ts, line, stmt):
        self.fields["urls"].extend(self.list_of_idents(ts))

    def st_consts(self, ts, line, stmt):
        self.fields["consts"].extend(self.list_of_idents(ts))

    def st_functions(self, ts, line, stmt):
        self.fields["functions"].extend(self.list_of_idents(ts))

    def st_bodies(self, ts, line, stmt):
        while True:
            name = ts.expect_ident().text
            if ts.accept("("):
                args = [ts.expect_ident().text]
                while ts.accept(","):
                    args.append(ts.expect_ident().text)
                ts.expect(")")
                name = f"{name}({','.join(args)})"
            self.fields["bodies"].append(name)
            if not ts.accept(","):
                break
        ts.expect_end()

    def st_domain(self, ts, line, stmt):
        name = ts.expect_ident().text
        ts.expect("=")
        if ts.accept("{"):
            values = []
            if not ts.at("}"):
                values = [ts.expect_ident().text]
                while ts.accept(","):
                    values.append(ts.expect_ident().text)
            ts.expect("}")
            decl = DomainDecl(name, tuple(values))
        else:
            prefix = ts.expect_ident().text
            ts.expect("[")
            lo = ts.expect_ident()
            if not lo.text.isdigit():
                raise ParseError("range start must be a numeral", lo.line, lo.column)
            ts.expect("..")
            hi = ts.expect_ident().text
            ts.expect("]")
            decl = DomainDecl(name, prefix=prefix, lo=int(lo.text), hi=hi)
        ts.expect_end()
        if decl.prefix and not decl.hi.isdigit() and decl.hi not in dict(self.fields["params"]):
            raise ValidationError(f"domain {name}: undeclared parameter {decl.hi}", line)
        self.fields["domains"].append(decl)

    def st_interpret(self, ts, line, stmt):
        symbols = []
        while not ts.at_end():
            tok = ts.next()
            if tok.text not in DEFAULT_INTERPRETED:
                raise ParseError(f"cannot interpret {tok.text!r}", tok.line, tok.column, tuple(sorted(DEFAULT_INTERPRETED)))
            symbols.append(tok.text)
        self.interpreted = symbols

    def st_display(self, ts, line, stmt):
        name = self.ident_or_string(ts)
        ts.expect("=")
        tok = ts.peek()
        if tok.kind != "STRING":
            ts.fail("expected a quoted display text", ('"..."',))
        ts.next()
        ts.expect_end()
        self.fields["display"].append((name, tok.text[1:-1]))

    def st_state(self, ts, line, stmt):
        comp = ts.expect_ident()
        if comp.text not in COMPONENTS:
            raise ParseError("expected a component", comp.line, comp.column, COMPONENTS)
        if any(s.component == comp.text for s in self.fields["states"]):
            raise ValidationError(f"{comp.text} state declared twice", line)
        if comp.text == "browser":
            decl = StateDecl("browser", ts.expect_ident().text)
        else:
            name = ts.expect_ident().text if not ts.at("(") else ""
            ts.expect("(")
            fields = []
            while True:
                fname = ts.expect_ident().text
                tname = None
                if ts.accept(":"):
                    words = [ts.expect_ident().text]
                    if words[0] == "set":
                        words.append(ts.expect_ident().text)
                    tname = " ".join(words)
                fields.append((fname, tname))
                if not ts.accept(","):
                    break
            ts.expect(")")
            decl = StateDecl(comp.text, name, tuple(fields))
        ts.expect_end()
        self.fields["states"].append(decl)

    def st_init(self, ts, line, stmt):
        doc = self.doc()
        comp = None
        if ts.peek().text in COMPONENTS:
            comp = ts.next().text
        elif len(doc.components) == 1:
            comp = doc.components[0]
        else:
            ts.fail("name the component being initialised", COMPONENTS)
        part = self.state_part(ts, doc, comp, allow_ellipsis=False)
        ts.expect_end()
        value = part if comp == "browser" else part.tuple
        self.fields["inits"].append((comp, value))

    def state_part(self, ts: TokenStream, doc: SpecDocument, comp: str, allow_ellipsis: bool):
        if allow_ellipsis and ts.peek().kind == "ELLIPSIS":
            ts.next()
            if comp != "browser":
                ts.fail("only the browser store can be left as '...'")
            return ELLIPSIS
        decl = doc.state_decl(comp)
        if decl is None:
            ts.fail(f"no {comp} state is declared")
        if comp == "browser":
            return self.cookie_set(ts)
        tok = ts.peek()
        name = ts.expect_ident().text if not ts.at("(") else ""
        if name != decl.name:
            raise ValidationError(f"{comp} state is {decl.name or 'unnamed'}(...), not {name or 'unnamed'}(...)",
                                  tok.line)
        ts.expect("(")
        values = []
        if not ts.at(")"):
            values.append(read_term(ts, self.is_constant))
            while ts.accept(","):
                values.append(read_term(ts, self.is_constant))
        ts.expect(")")
        if len(values) != len(decl.fields):
            raise ValidationError(f"{comp} state {decl.name}(...) has {len(decl.fields)} fields, "
                                  f"given {len(values)}", tok.line)
        return TuplePart(comp, StateTuple(decl.name, tuple(f for f, _ in decl.fields), tuple(values)))

    def cookie_set(self, ts: TokenStream) -> frozenset:
        ts.expect("{")
        names = []
        if not ts.at("}"):
            names.append(ts.expect_ident().text)
            while ts.accept(","):
                names.append(ts.expect_ident().text)
        ts.expect("}")
        return frozenset(names)

    def signed_set(self, ts: TokenStream) -> SignedCookieSet:
        ts.expect("{")
        add, remove = [], []
        while not ts.at("}"):
            sign = ts.next()
            if sign.text not in "+-" or sign.kind != "OP":
                raise ParseError("signed cookies look like +c or -c", sign.line, sign.column, ("+", "-"))
            (add if sign.text == "+" else remove).append(ts.expect_ident().text)
            if not ts.accept(","):
                break
        ts.expect("}")
        try:
            return SignedCookieSet(frozenset(add), frozenset(remove))
        except ValueError as e:
            raise ParseError(str(e), sign.line, sign.column) from None

    def st_rule(self, ts, line, stmt):
        self.rule(ts, line, parameters=())

    def st_schema(self, ts, line, stmt):
        name = ts.expect_ident().text
        ts.expect("(")
        params = []
        while True:
            p = ts.expect_ident().text
            ts.expect("in")
            params.append((p, ts.expect_ident().text))
            if not ts.accept(","):
                break
        ts.expect(")")
        self.rule(ts, line, parameters=tuple(params), name=name)

    def rule(self, ts: TokenStream, line: int, parameters, name: str | None = None) -> None:
        doc = self.doc()
        if name is None:
            name = ts.expect_ident().text
        side = "global"
        if ts.accept("side"):
            tok = ts.expect_ident()
            if tok.text not in ("client", "server"):
                raise ParseError("side is client or server", tok.line, tok.column, ("client", "server"))
            side = tok.text
        ts.expect(":")
        comps = (side,) if side != "global" else doc.components
        if not comps:
            ts.fail("declare the state components before the rules")
        has_browser = "browser" in comps
        source = self.state(ts, doc, comps)
        ts.expect("--[")
        cookie_alts = None
        if has_browser:
            cookie_alts = [self.cookie_set(ts)]
            while ts.accept("|"):
                cookie_alts.append(self.cookie_set(ts))
            ts.expect(",")
        urls = [ts.expect_ident().text]
        while ts.accept("|"):
            urls.append(ts.expect_ident().text)
        extras = []
        while ts.accept(","):
            extras.append(read_term(ts, self.is_constant))
        ts.expect("/")
        signed = None
        body = []
        if has_browser:
            signed = self.signed_set(ts)
            if ts.accept(","):
                body.append(read_term(ts, self.is_constant))
        elif not ts.at("]-->"):
            body.append(read_term(ts, self.is_constant))
        while ts.accept(","):
            body.append(read_term(ts, self.is_constant))
        ts.expect("]-->")
        target = self.state(ts, doc, comps)
        conditions = []
        if ts.accept("if"):
            conditions.append(self.condition(ts))
            while ts.accept(","):
                conditions.append(self.condition(ts))
        ts.expect_end()
        self.fields["rules"].append(RuleDecl(
            name, side, parameters, source, None if cookie_alts is None else tuple(cookie_alts), tuple(urls),
            tuple(extras), signed, tuple(body), target, tuple(conditions), line))

    def state(self, ts: TokenStream, doc: SpecDocument, comps) -> tuple:
        parts = [self.state_part(ts, doc, comps[0], allow_ellipsis=True)]
        for comp in comps[1:]:
            ts.expect(";")
            parts.append(self.state_part(ts, doc, comp, allow_ellipsis=True))
        return tuple(parts)

    def condition(self, ts: TokenStream):
        left = read_term(ts, self.is_constant)
        if ts.accept("in"):
            return Membership(left, read_term(ts, self.is_constant))
        if ts.accept("notin"):
            return NonMembership(left, read_term(ts, self.is_constant))
        ts.expect("!=")
        right = read_term(ts, self.is_constant)
        if isinstance(left, Var) and right == EPS:
            return NotEpsilon(left)
        return NotEqual(left, right)

    _FORMULA = re.compile(r"formula\s+(?P<name>\w+)(?P<sat>\s+sat)?\s*:(?P<body>.*?)"
                          r"(?:\s+expect\s+(?P<expect>holds|fails))?\s*$", re.S)

    def st_formula(self, ts, line, stmt):
        m = self._FORMULA.match(_strip_comments(stmt).strip())
        if m is None:
            tok = ts.peek()
            raise ParseError("expected 'formula NAME [sat] : FORMULA [expect holds|fails]'", tok.line, tok.column)
        doc = self.doc()
        formula = parse_formula(
            m.group("body"), constants=[n for n, _ in doc.params] + list(doc.globals),
            variables=[v.name for v in _safe_variables(doc)], shorthand=_safe_shorthand(doc),
            line_offset=line - 1)
        self.fields["formulas"].append(FormulaDecl(
            m.group("name"), formula, "sat" if m.group("sat") else "initial", m.group("expect"), line))

    def st_abbrev(self, ts, line, stmt):
        short = read_term(ts, self.is_constant)
        ts.expect("=")
        expansion = read_term(ts, self.is_constant)
        ts.expect_end()
        self.fields["abbreviations"].append((short, expansion))

    def st_assert(self, ts, line, stmt):
        name = ts.expect_ident().text
        ts.expect(":")
        command = ts.expect_ident().text
        side = ts.expect_ident()
        if side.text not in ("client", "server"):
            raise ParseError("expected client or server", side.line, side.column, ("client", "server"))
        ts.expect(".")
        field_name = ts.expect_ident().text
        ts.expect("=")
        expected = read_term(ts, self.is_constant)
        expect = "holds"
        if ts.accept("expect"):
            tok = ts.expect_ident()
            if tok.text not in ("holds", "fails"):
                raise ParseError("expected holds or fails", tok.line, tok.column, ("holds", "fails"))
            expect = tok.text
        ts.expect_end()
        self.fields["assertions"].append(AssertionDecl(name, command, side.text, field_name, expected, expect, line))


def _strip_comments(stmt: str) -> str:
    return "\n".join(re.sub(r"#.*$", "", ln) for ln in stmt.splitlines())


def _body_constants(bodies: Iterable[str]) -> set[str]:
    return {b for b in bodies if "(" not in b}


def _body_functions(bodies: Iterable[str]) -> dict[str, int]:
    return {b.split("(")[0]: b.count(",") + 1 for b in bodies if "(" in b}


def _safe_domains(doc: SpecDocument) -> dict[str, tuple]:
    try:
        return doc.domain_values()
    except KeyError:
        return {}


def _safe_variables(doc: SpecDocument) -> tuple[TypedVariable, ...]:
    try:
        return doc.typed_variables()
    except KeyError:
        return ()


def _safe_shorthand(doc: SpecDocument) -> str | None:
    try:
        return doc.shorthand_variable()
    except KeyError:
        return None


def load_spec(text: str, params: Mapping[str, int] | None = None) -> SpecDocument:
    """Parse and validate a spec; :class:`SpecError` lists every problem found."""
    return _Loader(params).load(text)


# -- validation ----------------------------------------------------------------

def validate(doc: SpecDocument) -> list[ValidationError]:
    errors: list[ValidationError] = []
    domains = doc.domain_values()
    for s in doc.states:
        for fname, tname in s.fields:
            if tname is None or tname == "nat":
                continue
            dom = tname.split()[-1]
            if dom not in domains:
                errors.append(ValidationError(f"field {fname} has an undeclared domain {dom}"))
    functions = set(doc.functions) | set(_body_functions(doc.bodies)) | {SET, SUCC} | set(doc.interpreted_symbols)
    for decl in doc.rules:
        errors.extend(_validate_rule(doc, decl, functions, domains))
    if not errors:
        for decl in doc.rules:
            parameters = {Var(p) for p, _ in decl.parameters}
            unbound = set().union(*(r.unbound_variables() for r in _expand(decl))) - parameters
            for v in sorted(unbound, key=render):
                errors.append(ValidationError(f"rule {decl.name}: variable {render(v)} is never bound", decl.line))
    names = {v.name: v for v in doc.typed_variables()}
    known_constants = {n for n, _ in doc.params} | set(doc.globals)
    for f in doc.formulas:
        errors.extend(_validate_formula(f, names, known_constants, domains))
    for a in doc.assertions:
        if a.command not in doc.urls:
            errors.append(ValidationError(f"assertion {a.name}: undeclared command {a.command}", a.line))
        decl = doc.state_decl(a.side)
        if decl is None or a.field_name not in [f for f, _ in decl.fields]:
            errors.append(ValidationError(f"assertion {a.name}: {a.side} state has no field {a.field_name}", a.line))
    return errors


def _validate_rule(doc, decl: RuleDecl, functions, domains) -> list[ValidationError]:
    errors = []

    def err(msg):
        errors.append(ValidationError(f"rule {decl.name}: {msg}", decl.line))

    for url in decl.url_alts:
        if url not in doc.urls:
            err(f"undeclared url {url}")
    stores = list(decl.cookie_alts or ()) + [p for p in decl.source + decl.target if isinstance(p, frozenset)]
    if decl.signed is not None:
        stores += [decl.signed.additions, decl.signed.removals]
    for store in stores:
        for c in sorted(store - set(doc.cookies)):
            err(f"undeclared cookie {c}")
    for p, d in decl.parameters:
        if d not in domains:
            err(f"undeclared domain {d}")
    src = next((p for p in decl.source if isinstance(p, frozenset)), None)
    if src is not None and decl.cookie_alts is not None and any(c != src for c in decl.cookie_alts):
        err(f"the request must echo the store {render_store(src)}")
    terms = list(decl.extras) + list(decl.body)
    for part in decl.source + decl.target:
        if isinstance(part, TuplePart):
            terms += part.tuple.values
    for t in terms:
        for fn in sorted(_function_symbols(t) - functions):
            err(f"undeclared function {fn}")
    return errors


def _function_symbols(t: Term) -> set[str]:
    if isinstance(t, Comp):
        out = {t.fn}
        for a in t.args:
            out |= _function_symbols(a)
        return out
    return set()


def _validate_formula(f: FormulaDecl, variables, constants, domains) -> list[ValidationError]:
    errors = []
    bound = set(constants) | {q.name for q in f.formula.prefix}
    for q in f.formula.prefix:
        if isinstance(q.domain, str) and q.domain not in domains:
            errors.append(ValidationError(f"formula {f.name}: undeclared domain {q.domain}", f.line))

    def check_var(name):
        if name not in variables:
            errors.append(ValidationError(f"formula {f.name}: {name} is not a typed state variable", f.line))
            return None
        return variables[name]

    def check_value(var, value):
        if isinstance(value, Ref) and value.name not in bound:
            errors.append(ValidationError(f"formula {f.name}: undeclared constant {value.name}", f.line))
        tv = variables.get(var)
        if tv is not None and tv.type.numeric and isinstance(value, Lit) and not isinstance(value.value, int):
            hint = "" if isinstance(value.value, frozenset) else f"; {value} is not a declared constant"
            errors.append(ValidationError(f"formula {f.name}: {var} is numeric but compared with {value}{hint}",
                                          f.line))

    def state(phi):
        match phi:
            case EqValue(var, value) | EqSucc(var, value) | LeqGlobal(var, value):
                check_var(var)
                check_value(var, value)
            case EqVars(a, b):
                check_var(a)
                check_var(b)
            case Not(q):
                state(q)
            case And(a, b):
                state(a)
                state(b)
            case ExistsPath(p):
                path(p)

    def path(p):
        if isinstance(p, Lift):
            state(p.state)
            return
        for attr in ("left", "right", "operand"):
            if hasattr(p, attr):
                path(getattr(p, attr))
        for v in getattr(p, "action", ()):
            if isinstance(v, Ref) and v.name not in bound:
                errors.append(ValidationError(f"formula {f.name}: undeclared constant {v.name}", f.line))

    body = f.formula.body
    state(body.state if isinstance(body, AlwaysInvariant) else body)
    return errors


# -- rendering -----------------------------------------------------------------

def render_spec(doc: SpecDocument) -> str:
    """Canonical DSL text; loading it again gives an equal document."""
    out = [f"spec {doc.name}"] if doc.name else []
    out += [f"param {n} = {v}" for n, v in doc.params]
    if doc.globals:
        out.append("global " + ", ".join(doc.globals))
    for kw, items in (("cookies", doc.cookies), ("urls", doc.urls), ("bodies", doc.bodies),
                      ("consts", doc.consts), ("functions", doc.functions)):
        if items:
            out.append(f"{kw} " + ", ".join(items))
    out += [d.render() for d in doc.domains]
    if doc.interpreted is not None:
        out.append("interpret " + " ".join(doc.interpreted))
    out += [f'display {n} = "{t}"' for n, t in doc.display]
    out += [s.render() for s in doc.states]
    for comp, value in doc.inits:
        out.append(f"init {comp} " + (render_store(value) if comp == "browser" else value.render()))
    out += [r.render() for r in doc.rules]
    shorthand = doc.shorthand_variable()
    for f in doc.formulas:
        text = f"formula {f.name}{' sat' if f.mode == 'sat' else ''} : {render_formula(f.formula, shorthand)}"
        if f.expect:
            text += f" expect {f.expect}"
        out.append(text)
    out += [f"abbrev {render(s)} = {render(e)}" for s, e in doc.abbreviations]
    out += [a.render() for a in doc.assertions]
    return "\n".join(out) + "\n"
