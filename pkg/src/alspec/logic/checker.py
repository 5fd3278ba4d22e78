"""Decision procedures for the supported fragment.

``∃π`` is decided for negation-free path formulae built from lifted state
formulae, ``&``, ``X``, ``X[χ]`` and ``U``.  Every such formula is satisfied
by a finite prefix, after which any maximal continuation will do, so the
search is a breadth-first walk over pairs of a state and the set of
obligations still owed at it.  An until is unfolded as ``q | (p & X(p U q))``;
a node with nothing left owed accepts.

Positions on a path are its states: position ``i`` is the state reached after
``i`` transitions, and a finite maximal path ends at a dead end whose position
carries no transition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterator, Mapping

from ..kts import Action, Kts, Path, Step, interpretation_of, render_state, shortest_path_to
from .syntax import (
    Always,
    AlwaysInvariant,
    And,
    EqSucc,
    EqValue,
    EqVars,
    ExistsPath,
    LeqGlobal,
    Lift,
    Lit,
    Next,
    NextA,
    Not,
    PAnd,
    PathFormula,
    PNot,
    QuantifiedFormula,
    Ref,
    StateFormula,
    TrueF,
    Until,
    expand_derived,
)


class UnboundConstant(KeyError):
    pass


class UnknownVariable(KeyError):
    pass


class TypeMismatch(TypeError):
    pass


class UnsupportedFragment(ValueError):
    pass


class UnboundedQuantifierDomain(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: Path | None = None
    counterexample: object = None  # a state or a Path
    bindings: Mapping[str, object] = field(default_factory=dict)
    state: Hashable | None = None
    assignments: int = 1

    def render(self, display: Mapping[str, str] | None = None) -> str:
        lines = ["HOLDS" if self.holds else "FAILS"]
        if self.bindings:
            lines.append("bindings: " + ", ".join(f"{k}={_show(v)}" for k, v in self.bindings.items()))
        if self.assignments != 1:
            lines.append(f"assignments checked: {self.assignments}")
        if self.state is not None and self.witness is None:
            lines.append("at: " + render_state(self.state, display))
        if self.witness is not None:
            lines.append("witness from " + render_state(self.witness.start, display) + ":")
            lines.append(self.witness.render(display))
        if isinstance(self.counterexample, Path):
            lines.append("counterexample path:")
            lines.append(self.counterexample.render(display) or render_state(self.counterexample.start, display))
        elif self.counterexample is not None:
            lines.append("counterexample: " + render_state(self.counterexample, display))
        return "\n".join(lines)


def _show(v) -> str:
    if isinstance(v, frozenset):
        return "{" + ",".join(sorted(map(str, v))) + "}"
    return str(v)


# -- values and state formulae -----------------------------------------------

def resolve(value, k: Mapping[str, object]):
    match value:
        case Lit(v):
            return v
        case Ref(name, offset):
            if name not in k:
                raise UnboundConstant(name)
            bound = k[name]
            if offset:
                if not isinstance(bound, int):
                    raise TypeMismatch(f"{name} is not numeric but is offset by {offset}")
                return bound + offset
            return bound
    raise TypeError(f"not a value: {value!r}")


def _lookup(kts: Kts, state: Hashable, var: str):
    tv = kts.variable(var)
    if tv is None:
        raise UnknownVariable(var)
    return tv, interpretation_of(kts, state).get(var)


def _check_type(tv, value) -> None:
    kind = tv.type.kind
    ok = (isinstance(value, int) if kind == "nat"
          else isinstance(value, frozenset) if kind == "powerset"
          else not isinstance(value, frozenset))
    if not ok:
        raise TypeMismatch(f"{tv.name} has type {tv.type}, compared with {_show(value)}")


def eval_state(kts: Kts, state: Hashable, phi: StateFormula, k: Mapping[str, object] | None = None) -> bool:
    k = k or {}
    match phi:
        case TrueF():
            return True
        case EqValue(var, value):
            tv, actual = _lookup(kts, state, var)
            expected = resolve(value, k)
            _check_type(tv, expected)
            return actual == expected
        case EqSucc(var, value):
            tv, actual = _lookup(kts, state, var)
            base = resolve(value, k)
            if not tv.type.numeric or not isinstance(base, int):
                raise TypeMismatch(f"{var} = {value}+1 needs numbers")
            return actual == base + 1
        case EqVars(var, other):
            tv, a = _lookup(kts, state, var)
            tw, b = _lookup(kts, state, other)
            if tv.type.kind != tw.type.kind:
                raise TypeMismatch(f"{var} and {other} have different types")
            return a == b
        case LeqGlobal(var, bound):
            tv, actual = _lookup(kts, state, var)
            limit = resolve(bound, k)
            if not tv.type.numeric or not isinstance(limit, int):
                raise TypeMismatch(f"{var} <= {bound} needs numbers")
            return actual <= limit
        case Not(q):
            return not eval_state(kts, state, q, k)
        case And(a, b):
            return eval_state(kts, state, a, k) and eval_state(kts, state, b, k)
        case ExistsPath(p):
            return eval_exists_path(kts, state, p, k).holds
    raise TypeError(f"not a state formula: {phi!r}")


# -- actions -----------------------------------------------------------------

def action_matches(pattern: tuple, token: Action, k: Mapping[str, object]) -> bool:
    """Exact match, or a shorter pattern matching the leading components (``A1`` matches ``(A1,B(1))``)."""
    wanted = tuple(str(resolve(v, k)) for v in pattern)
    return token == wanted or (len(wanted) < len(token) and token[:len(wanted)] == wanted)


def actions_match(pattern: tuple, actions: frozenset, k: Mapping[str, object]) -> bool:
    return any(action_matches(pattern, a, k) for a in actions)


# -- ∃π ----------------------------------------------------------------------

def _check_fragment(p: PathFormula) -> None:
    match p:
        case PNot() | Always():
            raise UnsupportedFragment("path negation and G are only supported as a top-level AG")
        case PAnd(a, b) | Until(a, b):
            _check_fragment(a)
            _check_fragment(b)
        case Next(q) | NextA(_, q):
            _check_fragment(q)


def _order(formulas) -> tuple:
    return tuple(sorted(formulas, key=repr))


def _unfold(kts: Kts, state, owed: tuple, k) -> Iterator[frozenset]:
    """Ways to meet ``owed`` at ``state``: each yields the (action, formula) pairs owed next."""
    def go(todo: tuple, nxt: frozenset) -> Iterator[frozenset]:
        if not todo:
            yield nxt
            return
        head, rest = todo[0], todo[1:]
        match head:
            case Lift(s):
                if eval_state(kts, state, s, k):
                    yield from go(rest, nxt)
            case PAnd(a, b):
                yield from go((a, b) + rest, nxt)
            case Next(q):
                yield from go(rest, nxt | {(None, q)})
            case NextA(action, q):
                yield from go(rest, nxt | {(action, q)})
            case Until(a, b):
                yield from go((b,) + rest, nxt)
                yield from go((a,) + rest, nxt | {(None, head)})
            case _:
                raise TypeError(f"not a path formula: {head!r}")

    seen = set()
    for nxt in go(owed, frozenset()):
        if nxt not in seen:
            seen.add(nxt)
            yield nxt


def eval_exists_path(kts: Kts, state: Hashable, pi: PathFormula, k: Mapping[str, object] | None = None,
                     bound: int = 64) -> Verdict:
    """Decide ``state ⊨ E π``; a positive verdict carries a maximal witness path.

    ``bound`` only limits how long a witness is kept for reporting.
    """
    k = k or {}
    pi = expand_derived(pi)
    _check_fragment(pi)
    start = (state, (pi,))
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        here, owed = node
        for nxt in _unfold(kts, here, owed, k):
            if not nxt:
                steps = _trace(parent, node)
                witness = _extend(kts, state, steps)
                return Verdict(True, witness if len(witness) <= bound else None, state=state)
            for actions, target in kts.successors(here):
                if not all(a is None or actions_match(a, actions, k) for a, _ in nxt):
                    continue
                child = (target, _order({q for _, q in nxt}))
                if child not in parent:
                    parent[child] = (node, Step(here, actions, target))
                    queue.append(child)
    return Verdict(False, state=state)


def _trace(parent: dict, node) -> list[Step]:
    steps = []
    while parent[node] is not None:
        node, step = parent[node]
        steps.append(step)
    return steps[::-1]


def _extend(kts: Kts, start, steps: list[Step]) -> Path:
    """Continue a finite prefix along first successors until a dead end or a repeat."""
    here = steps[-1].target if steps else start
    walked = {here: len(steps)}
    steps = list(steps)
    while True:
        succ = kts.successors(here)
        if not succ:
            return Path(start, tuple(steps))
        actions, target = succ[0]
        steps.append(Step(here, actions, target))
        if target in walked:
            i = walked[target]
            return Path(start, tuple(steps[:i]), tuple(steps[i:]))
        walked[target] = len(steps)
        here = target


# -- reference semantics over an explicit path --------------------------------

def path_satisfies(kts: Kts, path: Path, pi: PathFormula, k: Mapping[str, object] | None = None,
                   position: int = 0) -> bool:
    """Direct recursive semantics of ``π`` at ``position`` of an explicit maximal path."""
    k = k or {}
    return _sat(kts, path, expand_derived(pi), k, position)


def _sat(kts, path: Path, pi, k, i: int) -> bool:
    match pi:
        case Lift(s):
            return eval_state(kts, path.state_at(i), s, k)
        case PAnd(a, b):
            return _sat(kts, path, a, k, i) and _sat(kts, path, b, k, i)
        case Next(q):
            return path.step_at(i) is not None and _sat(kts, path, q, k, i + 1)
        case NextA(action, q):
            step = path.step_at(i)
            return step is not None and actions_match(action, step.actions, k) and _sat(kts, path, q, k, i + 1)
        case Until(a, b):
            # Past prefix plus one loop lap every suffix has been seen.
            horizon = i + len(path) if path.loop else len(path.prefix)
            for j in range(i, horizon + 1):
                if _sat(kts, path, b, k, j):
                    return True
                if not _sat(kts, path, a, k, j):
                    return False
            return False
        case PNot(q):
            return not _sat(kts, path, q, k, i)
        case Always(q):
            horizon = i + len(path) if path.loop else len(path.prefix)
            return all(_sat(kts, path, q, k, j) for j in range(i, horizon + 1))
    raise TypeError(f"not a path formula: {pi!r}")


# -- invariants and quantifiers ----------------------------------------------

def check_invariant(kts: Kts, phi: StateFormula, k: Mapping[str, object] | None = None) -> Verdict:
    """``AG φ``: every reachable state satisfies φ; otherwise the first violation and a path to it."""
    for state in kts.states:
        if not eval_state(kts, state, phi, k):
            path = shortest_path_to(kts, state) if kts.initial is not None else None
            return Verdict(False, counterexample=path if path is not None else state, state=state)
    return Verdict(True)


def _evaluate_body(kts: Kts, body, k, mode: str, bound: int) -> Verdict:
    if isinstance(body, AlwaysInvariant):
        return check_invariant(kts, body.state, k)
    if mode == "sat":
        for state in kts.states:
            v = _evaluate_at(kts, state, body, k, bound)
            if v.holds:
                return v
        return Verdict(False)
    if kts.initial is None:
        raise ValueError("the transition system has no initial state")
    return _evaluate_at(kts, kts.initial, body, k, bound)


def _evaluate_at(kts, state, body, k, bound) -> Verdict:
    if isinstance(body, ExistsPath):
        v = eval_exists_path(kts, state, body.path, k, bound)
        return v
    return Verdict(eval_state(kts, state, body, k), state=state)


def _compared_variables(body, name: str) -> set[str]:
    found: set[str] = set()

    def state(phi):
        match phi:
            case EqValue(var, Ref(n, _)) | EqSucc(var, Ref(n, _)) | LeqGlobal(var, Ref(n, _)) if n == name:
                found.add(var)
            case Not(q):
                state(q)
            case And(a, b):
                state(a)
                state(b)
            case ExistsPath(p):
                path(p)

    def path(p):
        match p:
            case Lift(s):
                state(s)
            case PAnd(a, b) | Until(a, b):
                path(a)
                path(b)
            case _ if hasattr(p, "operand"):
                path(p.operand)
            case _ if hasattr(p, "left"):
                path(p.left)
                path(p.right)

    state(body.state if isinstance(body, AlwaysInvariant) else body)
    return found


def quantifier_domain(kts: Kts, qf: QuantifiedFormula, q, domains: Mapping[str, tuple] | None) -> tuple:
    """Values a quantified name ranges over: a named domain, a literal list, or the
    observed values of the variable it is compared with."""
    domains = domains or {}
    if isinstance(q.domain, tuple):
        return tuple(v.value if isinstance(v, Lit) else v for v in q.domain)
    if isinstance(q.domain, str):
        if q.domain not in domains:
            raise UnboundedQuantifierDomain(f"{q.name}: unknown domain {q.domain!r}")
        return tuple(domains[q.domain])
    if q.name in domains:
        return tuple(domains[q.name])
    compared = _compared_variables(qf.body, q.name)
    if len(compared) != 1:
        raise UnboundedQuantifierDomain(f"{q.name}: give a domain, none can be inferred")
    var = compared.pop()
    values = {interpretation_of(kts, s).get(var) for s in kts.states}
    values.discard(None)
    try:
        return tuple(sorted(values))
    except TypeError:
        raise UnboundedQuantifierDomain(f"{q.name}: observed values of {var} are not ordered") from None


def check_quantified(kts: Kts, qf: QuantifiedFormula, k: Mapping[str, object] | None = None, *,
                     domains: Mapping[str, tuple] | None = None, bound: int = 64,
                     mode: str = "initial") -> Verdict:
    """Evaluate a quantified formula at the initial state, or in ``sat`` mode at any reachable state.

    Quantifiers are enumerated in order; ``assignments`` counts body evaluations.
    """
    if mode not in ("initial", "sat"):
        raise ValueError(f"unknown mode {mode!r}")
    base = dict(k or {})
    ranges = [quantifier_domain(kts, qf, q, domains) for q in qf.prefix]
    count = 0

    def go(i: int, env: dict) -> Verdict:
        nonlocal count
        if i == len(qf.prefix):
            count += 1
            v = _evaluate_body(kts, qf.body, env, mode, bound)
            return Verdict(v.holds, v.witness, v.counterexample,
                           {q.name: env[q.name] for q in qf.prefix}, v.state)
        q = qf.prefix[i]
        last = None
        for value in ranges[i]:
            v = go(i + 1, {**env, q.name: value})
            last = v
            if q.kind == "exists" and v.holds:
                return v
            if q.kind == "forall" and not v.holds:
                return v
        if last is None:
            return Verdict(q.kind == "forall")
        return Verdict(q.kind == "forall", bindings=last.bindings if q.kind == "forall" else {})

    result = go(0, base)
    return Verdict(result.holds, result.witness, result.counterexample, result.bindings, result.state, count)


def all_assignments(kts: Kts, qf: QuantifiedFormula, domains=None) -> Iterator[dict]:
    ranges = [quantifier_domain(kts, qf, q, domains) for q in qf.prefix]
    for values in product(*ranges):
        yield {q.name: v for q, v in zip(qf.prefix, values)}
