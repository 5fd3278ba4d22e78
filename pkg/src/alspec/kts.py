"""Kripke transition systems with typed-variable interpretations.

States carry an interpretation of a set of typed variables; transitions carry
sets of actions, with at most one transition per ordered pair of states.
Systems are generated by breadth-first exploration of a concrete rule set.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .http_model import (
    DEFAULT_INTERPRETED,
    GlobalState,
    Request,
    Response,
    TransitionRule,
    applicable,
    evaluate,
    fire,
    is_value,
    render_store,
    to_value,
)
from .terms import apply_substitution, is_ground, match_pattern, render, sort_key

log = logging.getLogger(__name__)

Action = tuple[str, ...]

DEFAULT_MAX_STATES = 10_000
DEFAULT_MAX_DEPTH = 64


class LimitExceeded(Exception):
    def __init__(self, message: str, frontier: int):
        super().__init__(f"{message} (frontier size {frontier})")
        self.frontier = frontier


class SymbolicSymbol(Exception):
    pass


class UnknownState(KeyError):
    pass


@dataclass(frozen=True)
class VarType:
    """``nat`` (optionally bounded), ``powerset`` of a finite domain, or ``enum`` over one."""

    kind: str
    domain: tuple = ()
    upper: int | None = None

    def contains(self, value) -> bool:
        if self.kind == "nat":
            return isinstance(value, int) and value >= 0 and (self.upper is None or value <= self.upper)
        if self.kind == "powerset":
            return isinstance(value, frozenset) and value <= frozenset(self.domain)
        if self.kind == "enum":
            return value in self.domain
        raise ValueError(f"unknown type kind {self.kind!r}")

    @property
    def numeric(self) -> bool:
        return self.kind == "nat"

    def __str__(self) -> str:
        if self.kind == "nat":
            return "nat" if self.upper is None else f"0..{self.upper}"
        if self.kind == "powerset":
            return "set " + render_store(self.domain)
        return render_store(self.domain)


@dataclass(frozen=True)
class TypedVariable:
    """A variable read from one component of a state: the browser store or a tuple field."""

    name: str
    type: VarType
    component: str = "server"
    index: int = 0

    def read(self, state: GlobalState):
        if self.component == "browser":
            return frozenset(state.browser)
        tup = getattr(state, self.component)
        return to_value(tup.values[self.index])


def render_action(action: Action, display: Mapping[str, str] | None = None) -> str:
    parts = [display.get(p, p) for p in action] if display else list(action)
    return "(" + ",".join(parts) + ")"


def render_actions(actions: Iterable[Action], display: Mapping[str, str] | None = None) -> str:
    """Alternatives joined with a vertical bar."""
    return "|".join(render_action(a, display) for a in sorted(actions, key=lambda a: [sort_key(p) for p in a]))


def render_state(state: Hashable, display: Mapping[str, str] | None = None) -> str:
    if isinstance(state, GlobalState):
        return state.render(display)
    return str(state)


@dataclass(frozen=True)
class Step:
    source: Hashable
    actions: frozenset
    target: Hashable

    def render(self, display=None) -> str:
        return f"{render_state(self.source, display)} --{render_actions(self.actions, display)}--> " \
               f"{render_state(self.target, display)}"


@dataclass(frozen=True)
class Path:
    """A finite path, or an infinite one written as prefix + loop (a lasso)."""

    start: Hashable
    prefix: tuple[Step, ...] = ()
    loop: tuple[Step, ...] = ()

    def __post_init__(self):
        steps = self.prefix + self.loop
        here = self.start
        for st in steps:
            if st.source != here:
                raise ValueError(f"path does not chain at {render_state(here)}")
            here = st.target
        if self.loop and here != self.loop[0].source:
            raise ValueError("loop does not close")

    @property
    def is_lasso(self) -> bool:
        return bool(self.loop)

    @property
    def steps(self) -> tuple[Step, ...]:
        return self.prefix + self.loop

    def __len__(self) -> int:
        return len(self.prefix) + len(self.loop)

    def _norm(self, i: int) -> int:
        p, l = len(self.prefix), len(self.loop)
        if l and i >= p:
            return p + (i - p) % l
        return i

    def state_at(self, i: int) -> Hashable | None:
        """State at position ``i`` (positions repeat around the loop); None past a finite end."""
        if not self.loop and i > len(self.prefix):
            return None
        j = self._norm(i)
        steps = self.steps
        return self.start if j == 0 else steps[j - 1].target if j <= len(steps) else None

    def step_at(self, i: int) -> Step | None:
        if not self.loop and i >= len(self.prefix):
            return None
        return self.steps[self._norm(i)]

    def states(self) -> list[Hashable]:
        return [self.start] + [s.target for s in self.steps]

    def is_maximal(self, kts: "Kts") -> bool:
        if self.loop:
            return True
        last = self.prefix[-1].target if self.prefix else self.start
        return not kts.successors(last)

    def render(self, display=None) -> str:
        lines = [st.render(display) for st in self.prefix]
        if self.loop:
            lines.append("loop:")
            lines += ["  " + st.render(display) for st in self.loop]
        if not self.steps:
            lines.append(render_state(self.start, display) + " (no transitions)")
        return "\n".join(lines)


@dataclass(frozen=True)
class Kts:
    states: tuple[Hashable, ...]
    transitions: Mapping[tuple[Hashable, Hashable], frozenset]
    variables: tuple[TypedVariable, ...] = ()
    interpretation: Mapping[Hashable, Mapping[str, object]] = field(default_factory=dict)
    initial: Hashable | None = None
    closed: bool = True
    _succ: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        order = {s: i for i, s in enumerate(self.states)}
        succ: dict = {s: [] for s in self.states}
        for (src, dst), acts in sorted(self.transitions.items(), key=lambda kv: (order[kv[0][0]], order[kv[0][1]])):
            succ[src].append((frozenset(acts), dst))
        object.__setattr__(self, "_succ", {s: tuple(v) for s, v in succ.items()})

    def successors(self, state: Hashable) -> tuple[tuple[frozenset, Hashable], ...]:
        return self._succ.get(state, ())

    def variable(self, name: str) -> TypedVariable | None:
        return next((v for v in self.variables if v.name == name), None)

    def summary(self) -> str:
        return f"states={len(self.states)} transitions={len(self.transitions)} closed={str(self.closed).lower()}"


def interpretation_of(kts: Kts, state: Hashable) -> Mapping[str, object]:
    if state not in kts.interpretation:
        if state in kts.states:
            return {}
        raise UnknownState(render_state(state))
    return kts.interpretation[state]


def interpret(state: GlobalState, variables: Sequence[TypedVariable]) -> dict[str, object]:
    out = {}
    for v in variables:
        value = v.read(state)
        if not v.type.contains(value):
            raise TypeError(f"{v.name} = {value!r} is outside its type {v.type}")
        out[v.name] = value
    return out


# -- exploration -------------------------------------------------------------

def action_token(request: Request, response: Response, include_url: bool | None = None) -> Action:
    """(request distinguisher..., body...) such as ``(2v,II)`` or ``(A1,B(1))``.

    The URL is dropped when the request carries extra elements, unless asked for.
    """
    if include_url is None:
        include_url = not request.extras
    parts = ([request.url] if include_url else []) + [render(t) for t in request.extras]
    return tuple(parts) + tuple(render(t) for t in response.body)


def candidate_requests(rules: Sequence[TransitionRule], state: GlobalState,
                       interpreted: frozenset[str] = DEFAULT_INTERPRETED) -> list[Request]:
    """Every request some rule's pattern could accept in ``state``; cookies are echoed."""
    cookies = state.browser if state.browser is not None else frozenset()
    seen: dict[Request, None] = {}
    for rule in rules:
        binding: dict = {}
        ok = True
        for pat, actual in ((rule.source.client, state.client), (rule.source.server, state.server)):
            if pat is None or actual is None:
                continue
            if pat.name != actual.name or len(pat.values) != len(actual.values):
                ok = False
                break
            for p, a in zip(pat.values, actual.values):
                if match_pattern(p, a, binding) is None:
                    ok = False
                    break
        if not ok:
            continue
        extras = tuple(evaluate(apply_substitution(t, binding), interpreted) for t in rule.request.extras)
        if not all(is_ground(t) for t in extras):
            raise SymbolicSymbol(f"rule {rule.name}: request elements {', '.join(map(render, extras))} "
                                 "are not determined by the state")
        seen.setdefault(Request(cookies, rule.request.url, extras), None)
    return list(seen)


def _check_concrete(state: GlobalState, rule: TransitionRule, interpreted) -> None:
    for t in state.terms():
        if not is_value(t, interpreted):
            raise SymbolicSymbol(f"rule {rule.name} produced the symbolic term {render(t)}")


def explore(rules: Sequence[TransitionRule], initial: GlobalState,
            variables: Sequence[TypedVariable] = (), *,
            interpreted: frozenset[str] = DEFAULT_INTERPRETED,
            include_url: bool | None = None,
            max_states: int = DEFAULT_MAX_STATES,
            max_depth: int = DEFAULT_MAX_DEPTH,
            strict: bool = True) -> Kts:
    """Breadth-first closure of ``rules`` from ``initial``.

    Parallel transactions between the same two states merge into one
    transition whose action set collects their tokens.  When a limit trips
    the result is marked ``closed=False``, or :class:`LimitExceeded` is
    raised if ``strict``.
    """
    order = [initial]
    depth = {initial: 0}
    transitions: dict[tuple, set] = {}
    queue = deque([initial])
    closed = True
    while queue:
        state = queue.popleft()
        if depth[state] >= max_depth:
            if strict:
                raise LimitExceeded(f"depth limit {max_depth} reached", len(queue) + 1)
            closed = False
            continue
        for request in candidate_requests(rules, state, interpreted):
            for rule in rules:
                if applicable(rule, state, request, interpreted) is None:
                    continue
                response, target = fire(rule, state, request, interpreted)
                _check_concrete(target, rule, interpreted)
                if not all(is_ground(t) for t in response.body):
                    raise SymbolicSymbol(f"rule {rule.name} produced a symbolic response")
                if target not in depth:
                    if len(order) >= max_states:
                        if strict:
                            raise LimitExceeded(f"state limit {max_states} reached", len(queue))
                        closed = False
                        continue
                    depth[target] = depth[state] + 1
                    order.append(target)
                    queue.append(target)
                transitions.setdefault((state, target), set()).add(action_token(request, response, include_url))
    log.debug("explored %d states, %d transitions", len(order), len(transitions))
    interp = {s: interpret(s, variables) for s in order}
    return Kts(
        states=tuple(order),
        transitions={k: frozenset(v) for k, v in transitions.items()},
        variables=tuple(variables),
        interpretation=interp,
        initial=initial,
        closed=closed,
    )


def replay(kts: Kts, rules: Sequence[TransitionRule], *,
           interpreted: frozenset[str] = DEFAULT_INTERPRETED,
           include_url: bool | None = None) -> list[str]:
    """Re-derive every transition from the rules.  Returns a list of problems, empty if the
    system is both sound (each action justified by a firing) and complete (each firing present)."""
    derived: dict[tuple, set] = {}
    for state in kts.states:
        for request in candidate_requests(rules, state, interpreted):
            for rule in rules:
                if applicable(rule, state, request, interpreted) is None:
                    continue
                response, target = fire(rule, state, request, interpreted)
                derived.setdefault((state, target), set()).add(action_token(request, response, include_url))
    problems = []
    for key, acts in kts.transitions.items():
        extra = set(acts) - derived.get(key, set())
        if extra:
            problems.append(f"unjustified {render_actions(extra)} on {render_state(key[0])} -> {render_state(key[1])}")
    for key, acts in derived.items():
        missing = acts - set(kts.transitions.get(key, ()))
        if missing and (kts.closed or key[1] in kts.interpretation):
            problems.append(f"missing {render_actions(missing)} on {render_state(key[0])} -> {render_state(key[1])}")
    return problems


# -- paths -------------------------------------------------------------------

def maximal_path_iter(kts: Kts, start: Hashable, bound: int) -> Iterator[Path]:
    """Maximal paths from ``start`` with at most ``bound`` transitions.

    Finite paths end in a state without successors; infinite ones are lassos,
    each yielded once in its shortest prefix + loop form.  Order follows the
    successor order depth first.
    """
    if start not in kts.states:
        raise UnknownState(render_state(start))
    steps: list[Step] = []

    def walk(here) -> Iterator[Path]:
        succ = kts.successors(here)
        if not succ:
            yield Path(start, tuple(steps))
            return
        if len(steps) >= bound:
            return
        for acts, nxt in succ:
            steps.append(Step(here, acts, nxt))
            for k, st in enumerate(steps):
                if st.source == nxt and _canonical_lasso(steps, k):
                    yield Path(start, tuple(steps[:k]), tuple(steps[k:]))
            yield from walk(nxt)
            steps.pop()

    yield from walk(start)


def _canonical_lasso(steps: list[Step], k: int) -> bool:
    loop = steps[k:]
    n = len(loop)
    for d in range(1, n):
        if n % d == 0 and loop == loop[:d] * (n // d):
            return False
    return k == 0 or steps[k - 1] != steps[-1]


def shortest_path_to(kts: Kts, goal: Hashable, start: Hashable | None = None) -> Path | None:
    """BFS path from the initial state (or ``start``) to ``goal``."""
    start = kts.initial if start is None else start
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s == goal:
            out = []
            while parent[s] is not None:
                out.append(parent[s])
                s = parent[s].source
            return Path(start, tuple(reversed(out)))
        for acts, t in kts.successors(s):
            if t not in parent:
                parent[t] = Step(s, acts, t)
                queue.append(t)
    return None


# -- DOT ---------------------------------------------------------------------

def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(kts: Kts, name: str = "kts", display: Mapping[str, str] | None = None) -> str:
    """Graphviz digraph: one node per state, one edge per transition, a point marking the
    initial state."""
    ids = {s: f"s{i}" for i, s in enumerate(kts.states)}
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=LR;", "  node [shape=ellipse];"]
    if kts.initial is not None:
        lines.append('  __init [shape=point, label=""];')
    for s in kts.states:
        lines.append(f"  {ids[s]} [label={_dot_quote(render_state(s, display))}];")
    if kts.initial is not None:
        lines.append(f"  __init -> {ids[kts.initial]};")
    for s in kts.states:
        for acts, t in kts.successors(s):
            lines.append(f"  {ids[s]} -> {ids[t]} [label={_dot_quote(render_actions(acts, display))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
