"""Concrete syntax for formulae.

Path operators bind as follows, loosest first: ``&``, then ``U`` and
``T[χ]`` (both right-associative, ``T`` tighter), then the prefixes ``X``,
``X[χ]``, ``F``, ``G`` and ``!``.  A set literal on its own is shorthand for
``c = {...}`` when the spec has a single set-typed variable ``c``.
"""

from __future__ import annotations

from typing import Iterable

from ..lexing import ParseError, TokenStream
from ..terms import Const, read_term, render
from .syntax import (
    Always,
    AlwaysInvariant,
    And,
    EqSucc,
    EqValue,
    EqVars,
    Eventually,
    ExistsPath,
    LeqGlobal,
    Lift,
    Lit,
    Next,
    NextA,
    Not,
    PAnd,
    PNot,
    Quantifier,
    QuantifiedFormula,
    Ref,
    TrueF,
    TStep,
    Until,
)

KEYWORDS = frozenset({"exists", "forall", "in", "AG", "E", "X", "F", "G", "U", "T", "true"})


def parse_formula(text: str, constants: Iterable[str] = (), *, variables: Iterable[str] | None = None,
                  shorthand: str | None = None, line_offset: int = 0) -> QuantifiedFormula:
    """Parse a possibly quantified formula.

    ``constants`` names the global constants (``N``); quantified names are
    added automatically.  When ``variables`` is given, ``x = y`` with ``y`` a
    state variable parses as variable equality.
    """
    parser = _Parser(TokenStream.of(text, line_offset=line_offset), set(constants),
                     None if variables is None else set(variables), shorthand)
    result = parser.top()
    parser.ts.expect_end()
    return result


class _Parser:
    def __init__(self, ts: TokenStream, names: set[str], variables: set[str] | None, shorthand: str | None):
        self.ts = ts
        self.names = names
        self.variables = variables
        self.shorthand = shorthand

    # -- top level ---------------------------------------------------------

    def top(self) -> QuantifiedFormula:
        prefix: list[Quantifier] = []
        while self.ts.at("exists") or self.ts.at("forall"):
            kind = self.ts.next().text
            while True:
                name = self.ts.expect_ident().text
                domain = self.domain() if self.ts.accept("in") else None
                prefix.append(Quantifier(kind, name, domain))
                self.names.add(name)
                if not self.ts.accept(","):
                    break
            self.ts.expect(":")
        if self.ts.accept("AG"):
            self.ts.expect("(")
            body = AlwaysInvariant(self.state_and())
            self.ts.expect(")")
        else:
            body = self.state_and()
        return QuantifiedFormula(tuple(prefix), body)

    def domain(self):
        if self.ts.accept("{"):
            values = [self.literal()]
            while self.ts.accept(","):
                values.append(self.literal())
            self.ts.expect("}")
            return tuple(values)
        tok = self.ts.expect_ident()
        if tok.text.isdigit() and self.ts.accept(".."):
            hi = self.ts.expect_ident()
            if not hi.text.isdigit():
                raise ParseError("range bounds must be numerals", hi.line, hi.column)
            return tuple(Lit(i) for i in range(int(tok.text), int(hi.text) + 1))
        return tok.text

    def literal(self) -> Lit:
        tok = self.ts.peek()
        if tok.kind == "STRING":
            self.ts.next()
            return Lit(tok.text)
        tok = self.ts.expect_ident()
        return Lit(int(tok.text)) if tok.text.isdigit() else Lit(tok.text)

    # -- state formulae ----------------------------------------------------

    def state_and(self):
        left = self.state_unary()
        while self.ts.accept("&"):
            left = And(left, self.state_unary())
        return left

    def state_unary(self):
        if self.ts.accept("!"):
            return Not(self.state_unary())
        if self.ts.accept("("):
            inner = self.state_and()
            self.ts.expect(")")
            return inner
        return self.state_atom()

    def state_atom(self):
        ts = self.ts
        if ts.accept("true"):
            return TrueF()
        if ts.at("{"):
            tok = ts.peek()
            if self.shorthand is None:
                raise ParseError("set shorthand needs exactly one set-typed variable", tok.line, tok.column)
            return EqValue(self.shorthand, self.set_literal())
        if ts.at("E") and ts.at("(", 1):
            ts.next()
            ts.next()
            path = self.path_and()
            ts.expect(")")
            return ExistsPath(path)
        tok = ts.peek()
        if tok.kind != "IDENT" or tok.text in KEYWORDS:
            ts.fail("expected a formula", ("true", "E(", "!", "(", "{", "<variable>"))
        var = ts.next().text
        if ts.accept("<="):
            base, offset = self.value()
            return LeqGlobal(var, _offset(base, offset, tok))
        ts.expect("=")
        rhs = ts.peek()
        if (self.variables is not None and rhs.kind == "IDENT" and rhs.text in self.variables
                and not ts.at("+", 1) and not ts.at("-", 1)):
            ts.next()
            return EqVars(var, rhs.text)
        base, offset = self.value()
        if offset == 1:
            return EqSucc(var, base)
        return EqValue(var, _offset(base, offset, tok))

    def set_literal(self) -> Lit:
        self.ts.expect("{")
        elems = []
        if not self.ts.at("}"):
            elems.append(self.literal().value)
            while self.ts.accept(","):
                elems.append(self.literal().value)
        self.ts.expect("}")
        return Lit(frozenset(elems))

    def value(self):
        ts = self.ts
        if ts.at("{"):
            return self.set_literal(), 0
        tok = ts.peek()
        if tok.kind == "STRING":
            ts.next()
            base = Lit(tok.text)
        else:
            tok = ts.expect_ident()
            if tok.text.isdigit():
                base = Lit(int(tok.text))
            elif tok.text in self.names:
                base = Ref(tok.text)
            else:
                base = Lit(tok.text)
        offset = 0
        while ts.at("+") or ts.at("-"):
            sign = 1 if ts.next().text == "+" else -1
            n = ts.expect_ident()
            if not n.text.isdigit():
                raise ParseError("expected a numeral offset", n.line, n.column)
            offset += sign * int(n.text)
        return base, offset

    # -- path formulae -----------------------------------------------------

    def path_and(self):
        left = self.path_until()
        while self.ts.accept("&"):
            right = self.path_until()
            if isinstance(left, Lift) and isinstance(right, Lift):
                left = Lift(And(left.state, right.state))
            else:
                left = PAnd(left, right)
        return left

    def path_until(self):
        left = self.path_step()
        if self.ts.accept("U"):
            return Until(left, self.path_until())
        return left

    def path_step(self):
        left = self.path_unary()
        if self.ts.at("T") and self.ts.at("[", 1):
            self.ts.next()
            action = self.action()
            return TStep(left, action, self.path_step())
        return left

    def path_unary(self):
        ts = self.ts
        if ts.at("X"):
            ts.next()
            if ts.at("["):
                action = self.action()
                return NextA(action, self.path_unary())
            return Next(self.path_unary())
        if ts.accept("F"):
            return Eventually(self.path_unary())
        if ts.accept("G"):
            return Always(self.path_unary())
        if ts.accept("!"):
            inner = self.path_unary()
            return Lift(Not(inner.state)) if isinstance(inner, Lift) else PNot(inner)
        if ts.accept("("):
            inner = self.path_and()
            ts.expect(")")
            return inner
        return Lift(self.state_atom())

    def action(self):
        ts = self.ts
        ts.expect("[")
        if ts.accept("("):
            items = [self.action_item()]
            while ts.accept(","):
                items.append(self.action_item())
            ts.expect(")")
        else:
            items = [self.action_item()]
        ts.expect("]")
        return tuple(items)

    def action_item(self):
        term = read_term(self.ts, lambda name: True)
        if isinstance(term, Const) and term.name in self.names:
            return Ref(term.name)
        return Lit(render(term))


def _offset(base, offset: int, tok):
    if offset == 0:
        return base
    if isinstance(base, Ref):
        return Ref(base.name, base.offset + offset)
    if isinstance(base, Lit) and isinstance(base.value, int):
        return Lit(base.value + offset)
    raise ParseError("only numbers and constants take an offset", tok.line, tok.column)
