"""Composition of client-side and server-side rules into global rules.

Requests are matched with the server tuple first (its variables are the ones
replaced), responses with the client tuple first.  Both substitutions are then
applied to both final states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .http_model import (
    GlobalState,
    NotEpsilon,
    SideCondition,
    StateTuple,
    TransitionRule,
    map_rule,
    map_state,
)
from .terms import (
    CLIENT,
    EPS,
    SERVER,
    Comp,
    MatchFailure,
    SideTag,
    Substitution,
    Term,
    Var,
    apply_substitution,
    compose_apply,
    map_terms,
    match_tuples,
    render,
    variables,
)


class AlreadyTagged(Exception):
    pass


class CommandMismatch(Exception):
    pass


class UnknownSlot(KeyError):
    pass


def tag_term(t: Term, tag: SideTag) -> Term:
    def visit(node: Term) -> Term | None:
        if isinstance(node, (Var, Comp)) and node.tag is not None and node.tag != tag:
            raise AlreadyTagged(f"{render(node)} already carries tag {node.tag}")
        if isinstance(node, Var):
            return Var(node.name, tag)
        if isinstance(node, Comp):
            return Comp(node.fn, node.args, tag)
        return None

    return map_terms(t, visit)


def tag_rule(rule: TransitionRule, tag: SideTag) -> TransitionRule:
    """Tag every variable and composite of a single-sided rule; constants stay untagged."""
    if rule.side == "global":
        raise ValueError(f"rule {rule.name} is not single-sided")
    return map_rule(rule, lambda t: tag_term(t, tag))


@dataclass(frozen=True)
class GlobalRule:
    command: str
    source: tuple[StateTuple, StateTuple]
    target: tuple[StateTuple, StateTuple]
    conditions: tuple[SideCondition, ...]
    client_rule: TransitionRule
    server_rule: TransitionRule
    sigma_request: Substitution
    sigma_response: Substitution

    @property
    def label(self) -> tuple[str, ...]:
        return (self.command,)

    def slot(self, side: str, field_name: str, *, initial: bool = False) -> Term:
        states = self.source if initial else self.target
        tup = {"client": states[0], "server": states[1]}.get(side)
        if tup is None:
            raise UnknownSlot(f"no {side} side")
        try:
            return tup.get(field_name)
        except KeyError:
            raise UnknownSlot(f"{side} state {tup.name} has no field {field_name!r}; "
                              f"fields are {', '.join(tup.fields)}") from None

    def render(self, abbreviations: Mapping[Term, Term] | None = None) -> str:
        """Display form: each side's own tags dropped and abbreviations (short form ->
        expansion) folded back in."""
        def show(tup: StateTuple, own: SideTag) -> str:
            vals = [display_view(v, own, abbreviations) for v in tup.values]
            return f"{tup.name}(" + ",".join(render(v) for v in vals) + ")"

        src = f"({show(self.source[0], CLIENT)},{show(self.source[1], SERVER)})"
        dst = f"({show(self.target[0], CLIENT)},{show(self.target[1], SERVER)})"
        return f"{src} --{self.command}--> {dst}"


def display_view(t: Term, own: SideTag, abbreviations: Mapping[Term, Term] | None = None) -> Term:
    """Strip the ``own`` tag everywhere except inside subterms tagged with another side.

    Any subterm equal to the expansion of an abbreviation (short form -> expansion)
    is first replaced by its short form.
    """
    if abbreviations:
        folded = {expansion: short for short, expansion in abbreviations.items()}
        t = map_terms(t, lambda node: folded.get(node))
    return _strip(t, own)


def _same_side(a: SideTag | None, b: SideTag) -> bool:
    return a is not None and a.side == b.side


def _strip(t: Term, own: SideTag) -> Term:
    match t:
        case Var(name, tag) if _same_side(tag, own):
            return Var(name)
        case Comp(fn, args, tag):
            if tag is not None and not _same_side(tag, own):
                return t
            new_tag = None if _same_side(tag, own) else tag
            return Comp(fn, tuple(_strip(a, own) for a in args), new_tag)
    return t


def _leading_command(rule: TransitionRule) -> str:
    return rule.request.url


def _check_not_eps(sigma: Substitution, conditions) -> None:
    guarded = {c.variable for c in conditions if isinstance(c, NotEpsilon)}
    for b in sigma:
        if not b.is_null and b.variable in guarded and b.replacement == EPS:
            raise MatchFailure(f"{render(b.variable)} may not be eps")


def pair_rules(client: TransitionRule, server: TransitionRule) -> tuple[Substitution, Substitution]:
    """Return ``(σ_request, σ_response)`` for two tagged rules sharing a command."""
    if _leading_command(client) != _leading_command(server):
        raise CommandMismatch(f"{_leading_command(client)} vs {_leading_command(server)}")
    sigma_req = match_tuples(server.request.elements, client.request.elements)
    sigma_resp = match_tuples(client.response.body, server.response.body)
    _check_not_eps(sigma_req, server.conditions)
    _check_not_eps(sigma_resp, client.conditions)
    return sigma_req, sigma_resp


def _is_tagged(rule: TransitionRule) -> bool:
    terms = [*rule.source.terms(), *rule.request.extras, *rule.response.body, *rule.target.terms()]
    return any(v.tag is not None for t in terms for v in variables(t))


def compose_global_rule(client: TransitionRule, server: TransitionRule,
                        client_tag: SideTag = CLIENT) -> GlobalRule:
    """Pair, then rewrite both final states.

    The client final state takes σ_response then σ_request, the server final
    state σ_request then σ_response, so a response term that mentions a request
    variable is rewritten too.
    Untagged rules are tagged first.
    """
    if client.side != "client" or server.side != "server":
        raise ValueError("expected a client-side rule and a server-side rule")
    if not _is_tagged(client):
        client = tag_rule(client, client_tag)
    if not _is_tagged(server):
        server = tag_rule(server, SERVER)
    sigma_req, sigma_resp = pair_rules(client, server)
    client_final = map_state(client.target, lambda t: compose_apply(t, [sigma_req, sigma_resp]))
    server_final = map_state(server.target, lambda t: compose_apply(t, [sigma_resp, sigma_req]))
    return GlobalRule(
        command=client.command,
        source=(client.source.client, server.source.server),
        target=(client_final.client, server_final.server),
        conditions=client.conditions + server.conditions,
        client_rule=client,
        server_rule=server,
        sigma_request=sigma_req,
        sigma_response=sigma_resp,
    )


@dataclass(frozen=True)
class SlotVerdict:
    holds: bool
    side: str
    field: str
    actual: Term
    expected: Term

    def __str__(self) -> str:
        verdict = "HOLDS" if self.holds else "FAILS"
        return f"{verdict}: {self.side}.{self.field} is {render(self.actual)}, expected {render(self.expected)}"


def check_slot(rule: GlobalRule, side: str, field_name: str, expected: Term,
               abbreviations: Mapping[Term, Term] | None = None) -> SlotVerdict:
    """Compare a final-state slot with ``expected``.

    ``abbreviations`` maps a short form to its expansion (``diffs_i`` to
    ``makeDiffs(doc_i,temp_i)_i``).  The slot matches if it equals the
    expectation exactly or once the slot's own-side tags are dropped from both.
    """
    actual = rule.slot(side, field_name)
    own = CLIENT if side == "client" else SERVER
    expanded = expected
    if abbreviations:
        expanded = map_terms(expected, lambda node: abbreviations.get(node))
    holds = actual == expanded or display_view(actual, own) == display_view(expanded, own)
    return SlotVerdict(holds, side, field_name, actual, expected)


def order_robust_client_final(rule: GlobalRule) -> GlobalState:
    """Client final state computed the other way round: σ_request is pushed into the
    replacements of σ_response, which is then applied once."""
    pushed = Substitution.of({v: apply_substitution(t, rule.sigma_request)
                              for v, t in rule.sigma_response.as_dict().items()})
    return map_state(rule.client_rule.target, lambda t: apply_substitution(t, pushed))
