"""Formula syntax trees for the state/event logic.

State formulae talk about typed variables (``x = v``, ``x = x'``, ``x <= k``);
path formulae add next, action-indexed next and until, plus the derived
``F`` and ``T`` (``π T[χ] π'`` is ``π & X[χ] π'``).

``F π`` is read through the action-indexed until ``true U_true π``, which
needs at least one transition before ``π``; it therefore expands to
``X (true U π)`` and never holds on the current position alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..http_model import render_store


# -- values ------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: object  # int, str or frozenset of str

    def __str__(self) -> str:
        if isinstance(self.value, frozenset):
            return render_store(self.value)
        return str(self.value)


@dataclass(frozen=True)
class Ref:
    """A global constant, optionally offset (``N-1``)."""

    name: str
    offset: int = 0

    def __str__(self) -> str:
        if self.offset > 0:
            return f"{self.name}+{self.offset}"
        if self.offset < 0:
            return f"{self.name}-{-self.offset}"
        return self.name


Value = Union[Lit, Ref]
ActionPattern = tuple[Value, ...]


def render_action_pattern(action: ActionPattern) -> str:
    if len(action) == 1 and isinstance(action[0], Ref):
        return str(action[0])
    return "(" + ",".join(str(v) for v in action) + ")"


# -- state formulae ----------------------------------------------------------

class StateFormula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(StateFormula):
    pass


@dataclass(frozen=True)
class EqValue(StateFormula):
    var: str
    value: Value


@dataclass(frozen=True)
class EqVars(StateFormula):
    var: str
    other: str


@dataclass(frozen=True)
class EqSucc(StateFormula):
    """``var = value + 1``."""

    var: str
    value: Value


@dataclass(frozen=True)
class LeqGlobal(StateFormula):
    var: str
    bound: Value


@dataclass(frozen=True)
class Not(StateFormula):
    operand: StateFormula


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula


@dataclass(frozen=True)
class ExistsPath(StateFormula):
    path: "PathFormula"


# -- path formulae -----------------------------------------------------------

class PathFormula:
    __slots__ = ()


@dataclass(frozen=True)
class Lift(PathFormula):
    state: StateFormula


@dataclass(frozen=True)
class PAnd(PathFormula):
    left: PathFormula
    right: PathFormula


@dataclass(frozen=True)
class Next(PathFormula):
    operand: PathFormula


@dataclass(frozen=True)
class NextA(PathFormula):
    action: ActionPattern
    operand: PathFormula


@dataclass(frozen=True)
class Until(PathFormula):
    left: PathFormula
    right: PathFormula


@dataclass(frozen=True)
class Eventually(PathFormula):
    operand: PathFormula


@dataclass(frozen=True)
class TStep(PathFormula):
    left: PathFormula
    action: ActionPattern
    right: PathFormula


# Parsed so they can be rejected with a clear error; not decided.
@dataclass(frozen=True)
class PNot(PathFormula):
    operand: PathFormula


@dataclass(frozen=True)
class Always(PathFormula):
    operand: PathFormula


# -- top level ---------------------------------------------------------------

@dataclass(frozen=True)
class AlwaysInvariant:
    """``AG φ``: φ holds in every reachable state."""

    state: StateFormula


@dataclass(frozen=True)
class Quantifier:
    kind: str  # "exists" or "forall"
    name: str
    domain: object = None  # domain name, tuple of literal values, or None to infer


@dataclass(frozen=True)
class QuantifiedFormula:
    prefix: tuple[Quantifier, ...]
    body: Union[StateFormula, AlwaysInvariant]


TRUE = TrueF()


def expand_derived(p: PathFormula) -> PathFormula:
    """Rewrite ``F π`` to ``X (true U π)`` and ``π T[χ] π'`` to ``π & X[χ] π'``, recursively."""
    match p:
        case Eventually(q):
            return Next(Until(Lift(TRUE), expand_derived(q)))
        case TStep(left, action, right):
            return PAnd(expand_derived(left), NextA(action, expand_derived(right)))
        case PAnd(a, b):
            return PAnd(expand_derived(a), expand_derived(b))
        case Next(q):
            return Next(expand_derived(q))
        case NextA(action, q):
            return NextA(action, expand_derived(q))
        case Until(a, b):
            return Until(expand_derived(a), expand_derived(b))
        case PNot(q):
            return PNot(expand_derived(q))
        case Always(q):
            return Always(expand_derived(q))
        case Lift(s):
            return Lift(_expand_state(s))
    raise TypeError(f"not a path formula: {p!r}")


def _expand_state(s: StateFormula) -> StateFormula:
    match s:
        case Not(q):
            return Not(_expand_state(q))
        case And(a, b):
            return And(_expand_state(a), _expand_state(b))
        case ExistsPath(p):
            return ExistsPath(expand_derived(p))
    return s


# -- rendering ---------------------------------------------------------------

def render_state_formula(s: StateFormula, shorthand: str | None = None) -> str:
    match s:
        case TrueF():
            return "true"
        case EqValue(var, Lit(value)) if var == shorthand and isinstance(value, frozenset):
            return render_store(value)
        case EqValue(var, value):
            return f"{var} = {value}"
        case EqVars(var, other):
            return f"{var} = {other}"
        case EqSucc(var, value):
            return f"{var} = {value}+1"
        case LeqGlobal(var, bound):
            return f"{var} <= {bound}"
        case Not(q):
            return f"!{_wrap_state(q, shorthand)}"
        case And(a, b):
            return f"{_wrap_state(a, shorthand)} & {_wrap_state(b, shorthand)}"
        case ExistsPath(p):
            return f"E({render_path_formula(p, shorthand)})"
    raise TypeError(s)


def _is_bare(s: StateFormula, shorthand) -> bool:
    shorthand_set = (isinstance(s, EqValue) and s.var == shorthand and isinstance(s.value, Lit)
                     and isinstance(s.value.value, frozenset))
    return shorthand_set or isinstance(s, (TrueF, ExistsPath))


def _wrap_state(s: StateFormula, shorthand) -> str:
    text = render_state_formula(s, shorthand)
    return text if _is_bare(s, shorthand) else f"({text})"


def render_path_formula(p: PathFormula, shorthand: str | None = None) -> str:
    match p:
        case Lift(s):
            return render_state_formula(s, shorthand)
        case PAnd(a, b):
            return f"{_wrap_path(a, shorthand)} & {_wrap_path(b, shorthand)}"
        case Next(q):
            return f"X {_wrap_path(q, shorthand)}"
        case NextA(action, q):
            return f"X[{render_action_pattern(action)}] {_wrap_path(q, shorthand)}"
        case Until(a, b):
            return f"{_wrap_path(a, shorthand)} U {_wrap_path(b, shorthand)}"
        case Eventually(q):
            return f"F {_wrap_path(q, shorthand)}"
        case TStep(a, action, b):
            return f"{_wrap_path(a, shorthand)} T[{render_action_pattern(action)}] {_wrap_path(b, shorthand)}"
        case PNot(q):
            return f"!{_wrap_path(q, shorthand)}"
        case Always(q):
            return f"G {_wrap_path(q, shorthand)}"
    raise TypeError(p)


def _wrap_path(p: PathFormula, shorthand) -> str:
    if isinstance(p, Lift):
        return _wrap_state(p.state, shorthand)
    return f"({render_path_formula(p, shorthand)})"


def render_formula(f: QuantifiedFormula, shorthand: str | None = None) -> str:
    parts = []
    for q in f.prefix:
        dom = q.domain
        if dom is None:
            parts.append(f"{q.kind} {q.name} : ")
        elif isinstance(dom, str):
            parts.append(f"{q.kind} {q.name} in {dom} : ")
        else:
            parts.append(f"{q.kind} {q.name} in {{{','.join(str(v) for v in dom)}}} : ")
    if isinstance(f.body, AlwaysInvariant):
        body = f"AG({render_state_formula(f.body.state, shorthand)})"
    else:
        body = render_state_formula(f.body, shorthand)
    return "".join(parts) + body
