"""HTTP transactions and application state.

A global state is the browser's cookie store together with optional client and
server state tuples.  Transition rules map a state pattern and a request
pattern to a response and a final state; rule schemas are rules with extra
parameters ranging over finite domains.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .terms import (
    EPS,
    SET,
    SUCC,
    Comp,
    Const,
    SideTag,
    Substitution,
    Term,
    Var,
    apply_substitution,
    is_ground,
    is_numeral,
    is_set,
    make_set,
    match_pattern,
    num,
    render,
    sort_key,
    variables,
)

CookieStore = frozenset  # frozenset[str]

DEFAULT_INTERPRETED = frozenset({SUCC, "union"})


class NotApplicable(Exception):
    pass


class UnboundedDomain(Exception):
    pass


@dataclass(frozen=True)
class SignedCookieSet:
    additions: frozenset[str] = frozenset()
    removals: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "additions", frozenset(self.additions))
        object.__setattr__(self, "removals", frozenset(self.removals))
        if self.additions & self.removals:
            raise ValueError(f"cookies both set and cleared: {sorted(self.additions & self.removals)}")

    def __str__(self) -> str:
        items = [f"+{c}" for c in sorted(self.additions, key=sort_key)]
        items += [f"-{c}" for c in sorted(self.removals, key=sort_key)]
        return "{" + ",".join(items) + "}"


def amend_cookie_store(store: frozenset[str], signed: SignedCookieSet) -> frozenset[str]:
    """``c' = c ∪ {x | +x ∈ c±} \\ {x | -x ∈ c±}``."""
    return (frozenset(store) | signed.additions) - signed.removals


def render_store(store: Iterable[str], display: Mapping[str, str] | None = None) -> str:
    names = sorted(store, key=sort_key)
    if display:
        names = [display.get(n, n) for n in names]
    return "{" + ",".join(names) + "}"


@dataclass(frozen=True)
class Request:
    cookies: frozenset[str]
    url: str
    extras: tuple[Term, ...] = ()

    @property
    def elements(self) -> tuple[Term, ...]:
        """The request as a tuple of terms, command/URL first."""
        return (Const(self.url),) + self.extras


@dataclass(frozen=True)
class Response:
    signed: SignedCookieSet = SignedCookieSet()
    body: tuple[Term, ...] = ()


@dataclass(frozen=True)
class StateTuple:
    """A named tuple of terms, e.g. ``s(luid,doc,diffss)``; the name is empty for ``(a,n)``."""

    name: str
    fields: tuple[str, ...]
    values: tuple[Term, ...]

    def __post_init__(self):
        if len(self.fields) != len(self.values):
            raise ValueError(f"{self.name or 'tuple'} has {len(self.fields)} fields but {len(self.values)} values")

    def get(self, field_name: str) -> Term:
        try:
            return self.values[self.fields.index(field_name)]
        except ValueError:
            raise KeyError(field_name) from None

    def with_values(self, values: Sequence[Term]) -> "StateTuple":
        return StateTuple(self.name, self.fields, tuple(values))

    def render(self, display: Mapping[str, str] | None = None) -> str:
        return f"{self.name}(" + ",".join(render(v, display) for v in self.values) + ")"


@dataclass(frozen=True)
class GlobalState:
    browser: frozenset[str] | None = None
    client: StateTuple | None = None
    server: StateTuple | None = None

    def components(self) -> list[str]:
        return [n for n in ("browser", "client", "server") if getattr(self, n) is not None]

    def terms(self) -> Iterable[Term]:
        for part in (self.client, self.server):
            if part is not None:
                yield from part.values

    def render(self, display: Mapping[str, str] | None = None) -> str:
        parts = []
        if self.browser is not None:
            parts.append(render_store(self.browser, display))
        for part in (self.client, self.server):
            if part is not None:
                parts.append(part.render(display))
        if len(parts) == 1:
            return parts[0]
        return "(" + ";".join(parts) + ")"

    def __str__(self) -> str:
        return self.render()


# -- side conditions ---------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    element: Term
    collection: Term

    def __str__(self) -> str:
        return f"{render(self.element)} in {render(self.collection)}"


@dataclass(frozen=True)
class NonMembership:
    element: Term
    collection: Term

    def __str__(self) -> str:
        return f"{render(self.element)} notin {render(self.collection)}"


@dataclass(frozen=True)
class NotEpsilon:
    variable: Term

    def __str__(self) -> str:
        return f"{render(self.variable)} != eps"


@dataclass(frozen=True)
class NotEqual:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{render(self.left)} != {render(self.right)}"


SideCondition = Membership | NonMembership | NotEpsilon | NotEqual


def condition_terms(cond: SideCondition) -> tuple[Term, ...]:
    match cond:
        case Membership(a, b) | NonMembership(a, b) | NotEqual(a, b):
            return (a, b)
        case NotEpsilon(v):
            return (v,)
    raise TypeError(cond)


def map_condition(cond: SideCondition, fn) -> SideCondition:
    match cond:
        case Membership(a, b):
            return Membership(fn(a), fn(b))
        case NonMembership(a, b):
            return NonMembership(fn(a), fn(b))
        case NotEpsilon(v):
            return NotEpsilon(fn(v))
        case NotEqual(a, b):
            return NotEqual(fn(a), fn(b))
    raise TypeError(cond)


def condition_holds(cond: SideCondition, binding: Mapping[Var, Term],
                    interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> bool | None:
    """Truth value under ``binding``; None while some variable is still unbound."""
    ground = [evaluate(apply_substitution(t, binding), interpreted) for t in condition_terms(cond)]
    if not all(is_ground(t) for t in ground):
        return None
    match cond:
        case Membership():
            return _member(ground[0], ground[1])
        case NonMembership():
            return not _member(ground[0], ground[1])
        case NotEpsilon():
            return ground[0] != EPS
        case NotEqual():
            return ground[0] != ground[1]
    raise TypeError(cond)


def _member(elem: Term, coll: Term) -> bool:
    if not is_set(coll):
        raise TypeError(f"membership test against a non-set {render(coll)}")
    return elem in coll.args


# -- rules -------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionRule:
    name: str
    source: GlobalState
    request: Request
    response: Response
    target: GlobalState
    conditions: tuple[SideCondition, ...] = ()
    side: str = "global"  # "client", "server" or "global"

    def __post_init__(self):
        if self.side not in ("client", "server", "global"):
            raise ValueError(f"unknown side {self.side!r}")

    @property
    def command(self) -> str:
        return self.request.url

    def input_variables(self) -> set[Var]:
        found = set()
        for t in (*self.source.terms(), *self.request.extras):
            found.update(variables(t))
        if self.side == "client":
            # A client consumes the response, so its elements bind too.
            for t in self.response.body:
                found.update(variables(t))
        return found

    def unbound_variables(self) -> set[Var]:
        """Variables used in the results or conditions but never bound by the inputs."""
        used = set()
        for t in (*self.target.terms(), *self.response.body):
            used.update(variables(t))
        for c in self.conditions:
            for t in condition_terms(c):
                used.update(variables(t))
        return used - self.input_variables()

    def __str__(self) -> str:
        req = ",".join(render(t) for t in self.request.elements)
        resp = ",".join(render(t) for t in self.response.body)
        text = f"{self.source} --[{req} / {resp}]--> {self.target}"
        if self.conditions:
            text += " if " + ", ".join(str(c) for c in self.conditions)
        return text


@dataclass(frozen=True)
class RuleSchema:
    """A rule whose ``parameters`` (variables of the rule) range over the given domains.

    A domain of None stands for an infinite domain such as the naturals.
    """

    rule: TransitionRule
    parameters: tuple[tuple[str, tuple[Term, ...] | None], ...] = field(default=())


def map_state(state: GlobalState, fn) -> GlobalState:
    def tup(t):
        return None if t is None else t.with_values([fn(v) for v in t.values])

    return GlobalState(state.browser, tup(state.client), tup(state.server))


def map_rule(rule: TransitionRule, fn, name: str | None = None) -> TransitionRule:
    """Apply a term transformer everywhere a rule holds terms."""
    return replace(
        rule,
        name=rule.name if name is None else name,
        source=map_state(rule.source, fn),
        request=replace(rule.request, extras=tuple(fn(t) for t in rule.request.extras)),
        response=replace(rule.response, body=tuple(fn(t) for t in rule.response.body)),
        target=map_state(rule.target, fn),
        conditions=tuple(map_condition(c, fn) for c in rule.conditions),
    )


def instantiate_schema(schema: RuleSchema, bound: int | None = None) -> list[TransitionRule]:
    """One concrete rule per element of the product of the parameter domains.

    Infinite domains are cut to ``0..bound`` when a bound is given.
    """
    names, domains = [], []
    for name, domain in schema.parameters:
        if domain is None:
            if bound is None:
                raise UnboundedDomain(f"parameter {name} of {schema.rule.name} ranges over an infinite domain")
            domain = tuple(num(i) for i in range(bound + 1))
        names.append(name)
        domains.append(domain)
    rules = []
    for values in itertools.product(*domains):
        table = {Var(n): v for n, v in zip(names, values)}
        suffix = ",".join(render(v) for v in values)
        rules.append(map_rule(schema.rule, lambda t: apply_substitution(t, table), f"{schema.rule.name}[{suffix}]"))
    return rules


# -- evaluation of interpreted symbols ---------------------------------------

def evaluate(t: Term, interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> Term:
    """Evaluate successor and set union on ground arguments; everything else stays symbolic."""
    if not isinstance(t, Comp):
        return t
    args = tuple(evaluate(a, interpreted) for a in t.args)
    if t.fn == SET:
        return make_set(args, t.tag)
    if t.fn == SUCC and SUCC in interpreted and all(is_numeral(a) for a in args):
        return num(sum(int(a.name) for a in args))
    if t.fn == "union" and "union" in interpreted and all(is_set(a) for a in args):
        return make_set(itertools.chain.from_iterable(a.args for a in args))
    return Comp(t.fn, args, t.tag)


def is_value(t: Term, interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> bool:
    """A fully evaluated ground term: constants and sets of values only."""
    match t:
        case Const():
            return True
        case Comp(fn, args, _) if fn == SET:
            return all(is_value(a, interpreted) for a in args)
    return False


def to_value(t: Term):
    """Python view of a ground value: int for numerals, str for constants, frozenset for sets."""
    if is_numeral(t):
        return int(t.name)
    if isinstance(t, Const):
        return t.name
    if is_set(t):
        return frozenset(to_value(a) for a in t.args)
    raise TypeError(f"not a value: {render(t)}")


# -- applicability and firing ------------------------------------------------

def _match_tuple(pattern: StateTuple | None, actual: StateTuple | None, binding: dict) -> bool:
    if pattern is None or actual is None:
        return pattern is None and actual is None
    if pattern.name != actual.name or len(pattern.values) != len(actual.values):
        return False
    return all(match_pattern(p, a, binding) is not None for p, a in zip(pattern.values, actual.values))


def applicable(rule: TransitionRule, state: GlobalState, request: Request,
               interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> Substitution | None:
    """The binding of the rule's pattern variables if the rule applies, otherwise None.

    Conditions over variables that the inputs leave unbound (a client rule's
    response variables) are not decided here.
    """
    if request.url != rule.request.url:
        return None
    if (rule.source.browser is None) != (state.browser is None):
        return None
    if rule.source.browser is not None and rule.source.browser != state.browser:
        return None
    if rule.request.cookies != request.cookies:
        return None
    if len(rule.request.extras) != len(request.extras):
        return None
    binding: dict[Var, Term] = {}
    if not _match_tuple(rule.source.client, state.client, binding):
        return None
    if not _match_tuple(rule.source.server, state.server, binding):
        return None
    for p, a in zip(rule.request.extras, request.extras):
        if match_pattern(p, a, binding) is None:
            return None
    for cond in rule.conditions:
        if condition_holds(cond, binding, interpreted) is False:
            return None
    return Substitution.of(binding)


def fire(rule: TransitionRule, state: GlobalState, request: Request,
         interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> tuple[Response, GlobalState]:
    sigma = applicable(rule, state, request, interpreted)
    if sigma is None:
        raise NotApplicable(f"rule {rule.name} does not apply to {state} with request {request.url}")

    def inst(t: Term) -> Term:
        return evaluate(apply_substitution(t, sigma), interpreted)

    response = Response(rule.response.signed, tuple(inst(t) for t in rule.response.body))
    target = map_state(rule.target, inst)
    if state.browser is not None:
        amended = amend_cookie_store(state.browser, rule.response.signed)
        if rule.target.browser != amended:
            raise ValueError(
                f"rule {rule.name}: final store {render_store(rule.target.browser or ())} "
                f"disagrees with the amended store {render_store(amended)}")
    return response, target
