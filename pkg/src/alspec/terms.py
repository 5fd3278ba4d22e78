"""Terms, partial matching and substitution.

Terms are variables, constants and composite terms.  Variables and composites
may carry a side tag (``_s`` for the server, ``_i``/``_i1``... for a client);
the tag is part of a variable's identity, so ``uid_s`` and ``uid_i`` are
distinct variables.

Matching is the one-directional pairing used to compose client and server
rules: the left argument holds the variables to be replaced, and only the five
structural cases below succeed.  Everything else raises :class:`MatchFailure`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

from .lexing import ParseError, TokenStream


class MatchFailure(Exception):
    pass


@dataclass(frozen=True)
class SideTag:
    side: str  # "client" or "server"
    index: int | None = None

    def __post_init__(self):
        if self.side not in ("client", "server"):
            raise ValueError(f"unknown side {self.side!r}")
        if self.side == "server" and self.index is not None:
            raise ValueError("server tags carry no index")
        if self.index is not None and self.index < 1:
            raise ValueError("client index must be positive")

    def __str__(self) -> str:
        if self.side == "server":
            return "s"
        return "i" if self.index is None else f"i{self.index}"

    @classmethod
    def parse(cls, text: str) -> "SideTag":
        if text == "s":
            return SERVER
        if text == "i":
            return CLIENT
        if text.startswith("i") and text[1:].isdigit():
            return cls("client", int(text[1:]))
        raise ValueError(f"not a side tag: {text!r}")


SERVER = SideTag("server")
CLIENT = SideTag("client")


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=True)
class Var(Term):
    name: str
    tag: SideTag | None = None


@dataclass(frozen=True, eq=True)
class Const(Term):
    name: str


@dataclass(frozen=True, eq=True)
class Comp(Term):
    fn: str
    args: tuple[Term, ...] = ()
    tag: SideTag | None = None


EPS = Const("eps")
SET = "{}"  # function symbol of finite-set literals
SUCC = "+"

TermLike = Union[Var, Const, Comp]


def num(n: int) -> Const:
    return Const(str(n))


def make_set(elements: Iterable[Term], tag: SideTag | None = None) -> Comp:
    """Finite set literal with elements deduplicated and in canonical order."""
    unique = {e: None for e in elements}
    return Comp(SET, tuple(sorted(unique, key=sort_key)), tag)


def is_set(t: Term) -> bool:
    return isinstance(t, Comp) and t.fn == SET


def is_numeral(t: Term) -> bool:
    return isinstance(t, Const) and t.name.isdigit()


def _natural_key(text: str):
    return [(0, int(part), "") if part.isdigit() else (1, 0, part) for part in re.split(r"(\d+)", text)]


def sort_key(t: object):
    return _natural_key(render(t) if isinstance(t, Term) else str(t))


# -- rendering ---------------------------------------------------------------

def render(t: Term, display: Mapping[str, str] | None = None) -> str:
    """Canonical text: ``uid_s``, ``f(a,b)_s``, ``(luid_s+1)_s``, ``{A1,A2}``, ``eps``."""
    match t:
        case Var(name, tag):
            return name if tag is None else f"{name}_{tag}"
        case Const(name):
            return display.get(name, name) if display else name
        case Comp(fn, args, tag):
            if fn == SET:
                body = "{" + ",".join(render(a, display) for a in args) + "}"
            elif fn == SUCC and len(args) == 2:
                right = render(args[1], display)
                if isinstance(args[1], Comp) and args[1].fn == SUCC and args[1].tag is None:
                    right = f"({right})"  # sums nest to the left when read back
                body = f"{render(args[0], display)}+{right}"
                if tag is not None:
                    body = f"({body})"
            else:
                body = f"{fn}(" + ",".join(render(a, display) for a in args) + ")"
            return body if tag is None else f"{body}_{tag}"
    raise TypeError(f"not a term: {t!r}")


# -- traversal ---------------------------------------------------------------

def variables(t: Term) -> Iterator[Var]:
    match t:
        case Var():
            yield t
        case Comp(_, args, _):
            for a in args:
                yield from variables(a)


def is_ground(t: Term) -> bool:
    return next(variables(t), None) is None


def map_terms(t: Term, fn: Callable[[Term], Term | None]) -> Term:
    """Bottom-up rebuild; ``fn`` may return a replacement or None to keep the node."""
    if isinstance(t, Comp):
        t = Comp(t.fn, tuple(map_terms(a, fn) for a in t.args), t.tag)
    out = fn(t)
    return t if out is None else out


# -- bindings and substitutions ----------------------------------------------

@dataclass(frozen=True)
class Binding:
    """``variable/replacement``; both None for the null binding ∅ produced by ``match(c, c)``."""

    variable: Var | None
    replacement: Term | None

    def __post_init__(self):
        if (self.variable is None) != (self.replacement is None):
            raise ValueError("a binding is either null or binds a variable")
        if self.variable is not None and not isinstance(self.variable, Var):
            raise TypeError("only variables can be bound")

    @property
    def is_null(self) -> bool:
        return self.variable is None

    def __str__(self) -> str:
        if self.is_null:
            return "∅"
        return f"{render(self.variable)}/{render(self.replacement)}"


NULL = Binding(None, None)


@dataclass(frozen=True)
class Substitution:
    bindings: tuple[Binding, ...] = ()

    def __post_init__(self):
        seen: set[Var] = set()
        for b in self.bindings:
            if b.is_null:
                continue
            if b.variable in seen:
                raise ValueError(f"variable {b.variable} bound twice")
            seen.add(b.variable)

    def __iter__(self):
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)

    def as_dict(self) -> dict[Var, Term]:
        return {b.variable: b.replacement for b in self.bindings if not b.is_null}

    def get(self, v: Var) -> Term | None:
        return self.as_dict().get(v)

    def __str__(self) -> str:
        return "{" + ", ".join(str(b) for b in self.bindings) + "}"

    @classmethod
    def of(cls, mapping: Mapping[Var, Term]) -> "Substitution":
        return cls(tuple(Binding(v, t) for v, t in mapping.items()))


def _union(head: Binding, tail: Substitution) -> Substitution:
    # Set union: identical bindings collapse, conflicting ones cannot both hold.
    if head in tail.bindings:
        return tail
    if not head.is_null and tail.get(head.variable) is not None:
        raise MatchFailure(f"{head.variable} bound to both {head.replacement} and {tail.get(head.variable)}")
    return Substitution((head,) + tail.bindings)


def match_elements(e: Term, e2: Term) -> Binding:
    """Match a single pair of elements: ``v/v'``, ``v/c'``, ``v/t'`` or ``∅`` for equal constants."""
    if isinstance(e, Var) and isinstance(e2, (Var, Const, Comp)):
        return Binding(e, e2)
    if isinstance(e, Const) and isinstance(e2, Const) and e == e2:
        return NULL
    raise MatchFailure(f"no matching case for ({render(e)}, {render(e2)})")


def match_tuples(t: Sequence[Term], t2: Sequence[Term]) -> Substitution:
    """Structural recursion over two tuples; tuples of different length do not match."""
    if not t and not t2:
        return Substitution()
    if not t or not t2:
        raise MatchFailure(f"tuples of different length: {len(t)} vs {len(t2)}")
    return _union(match_elements(t[0], t2[0]), match_tuples(t[1:], t2[1:]))


def apply_substitution(t: Term, sigma: Substitution | Mapping[Var, Term]) -> Term:
    """Replace every bound variable in one simultaneous pass; tags on composites are kept."""
    table = sigma.as_dict() if isinstance(sigma, Substitution) else dict(sigma)
    if not table:
        return t
    return _apply(t, table)


def _apply(t: Term, table: Mapping[Var, Term]) -> Term:
    match t:
        case Var():
            return table.get(t, t)
        case Comp(fn, args, tag):
            return Comp(fn, tuple(_apply(a, table) for a in args), tag)
    return t


def compose_apply(t: Term, sigmas: Sequence[Substitution]) -> Term:
    """Apply ``sigmas`` one after another, last one first."""
    for sigma in reversed(sigmas):
        t = apply_substitution(t, sigma)
    return t


def match_pattern(pattern: Term, term: Term, binding: dict[Var, Term] | None = None) -> dict[Var, Term] | None:
    """Ordinary first-order matching of a rule pattern against a concrete term.

    Unlike :func:`match_elements` this descends into composites on the left and
    checks repeated variables for consistency.  Returns the extended binding or
    None.
    """
    binding = {} if binding is None else binding
    match pattern:
        case Var():
            bound = binding.get(pattern)
            if bound is None:
                binding[pattern] = term
                return binding
            return binding if bound == term else None
        case Const():
            return binding if pattern == term else None
        case Comp(fn, args, tag):
            if not isinstance(term, Comp) or term.fn != fn or term.tag != tag or len(term.args) != len(args):
                return None
            if fn == SET and is_ground(pattern):
                return binding if make_set(args) == make_set(term.args) else None
            for p, a in zip(args, term.args):
                if match_pattern(p, a, binding) is None:
                    return None
            return binding
    return None


# -- parsing -----------------------------------------------------------------

_TAG_SUFFIX = re.compile(r"^(?P<name>.+?)_(?P<tag>s|i\d*)$")


def _split_tag(ident: str) -> tuple[str, SideTag | None]:
    m = _TAG_SUFFIX.match(ident)
    if m is None:
        return ident, None
    return m.group("name"), SideTag.parse(m.group("tag"))


def default_is_constant(name: str) -> bool:
    return name.isdigit() or name == "eps"


def parse_term(text: str, constants: Iterable[str] | Callable[[str], bool] = ()) -> Term:
    """Parse canonical term syntax.  Identifiers listed in ``constants`` (plus numerals and
    ``eps``) are constants; every other identifier is a variable."""
    ts = TokenStream.of(text)
    t = read_term(ts, _constant_test(constants))
    ts.expect_end()
    return t


def _constant_test(constants) -> Callable[[str], bool]:
    if callable(constants):
        return lambda n: default_is_constant(n) or constants(n)
    names = frozenset(constants)
    return lambda n: default_is_constant(n) or n in names


def _read_tag(ts: TokenStream) -> SideTag | None:
    tok = ts.peek()
    if tok.kind == "IDENT" and re.fullmatch(r"_(s|i\d*)", tok.text):
        ts.next()
        return SideTag.parse(tok.text[1:])
    return None


def read_term(ts: TokenStream, is_constant: Callable[[str], bool]) -> Term:
    t = _read_primary(ts, is_constant)
    while ts.at("+"):
        ts.next()
        t = Comp(SUCC, (t, _read_primary(ts, is_constant)))
    return t


def _read_primary(ts: TokenStream, is_constant: Callable[[str], bool]) -> Term:
    tok = ts.peek()
    if tok.kind == "STRING":
        ts.next()
        return Const(tok.text)
    if ts.accept("("):
        inner = read_term(ts, is_constant)
        ts.expect(")")
        tag = _read_tag(ts)
        if tag is not None:
            if not isinstance(inner, Comp):
                raise ParseError("only composite terms can be tagged with parentheses", tok.line, tok.column)
            inner = Comp(inner.fn, inner.args, tag)
        return inner
    if ts.accept("{"):
        elems = []
        if not ts.at("}"):
            elems.append(read_term(ts, is_constant))
            while ts.accept(","):
                elems.append(read_term(ts, is_constant))
        ts.expect("}")
        return make_set(elems, _read_tag(ts))
    if tok.kind != "IDENT":
        ts.fail("expected a term", ("<identifier>", "(", "{"))
    ts.next()
    if ts.at("("):
        ts.next()
        args = []
        if not ts.at(")"):
            args.append(read_term(ts, is_constant))
            while ts.accept(","):
                args.append(read_term(ts, is_constant))
        ts.expect(")")
        return Comp(tok.text, tuple(args), _read_tag(ts))
    name, tag = _split_tag(tok.text)
    if tag is None and is_constant(name):
        return Const(name)
    if tag is not None and is_constant(tok.text):
        return Const(tok.text)
    return Var(name, tag)
