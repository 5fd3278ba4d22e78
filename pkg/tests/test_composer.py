from dataclasses import replace

import pytest

from alspec.composer import (
    AlreadyTagged,
    CommandMismatch,
    UnknownSlot,
    check_slot,
    compose_global_rule,
    display_view,
    order_robust_client_final,
    pair_rules,
    tag_rule,
    tag_term,
)
from alspec.frontend.runner import compose_command, read_spec
from alspec.http_model import NotEpsilon
from alspec.terms import CLIENT, EPS, SERVER, Comp, MatchFailure, Var, parse_term, render

COMMANDS = ("GET_DOC", "GET_DIFFS", "PUT_DIFFS")


@pytest.fixture(scope="module")
def doc():
    return read_spec("quicdoc")


def side_rule(doc, side, command):
    (rule,) = [r for r in doc.side_rules(side) if r.command == command]
    return rule


def slot(text):
    return parse_term(text)


class TestTagging:
    def test_variables_and_composites_tagged(self):
        t = tag_term(parse_term("getDiffs(diffss,uid)"), SERVER)
        assert render(t) == "getDiffs(diffss_s,uid_s)_s"

    def test_constants_untouched(self):
        assert tag_term(EPS, CLIENT) == EPS

    def test_other_side_rejected(self):
        with pytest.raises(AlreadyTagged):
            tag_term(Var("uid", SERVER), CLIENT)

    def test_rule(self, doc):
        tagged = tag_rule(side_rule(doc, "client", "GET_DIFFS"), CLIENT)
        assert render(tagged.request.extras[0]) == "uid_i"


class TestPairing:
    def test_get_diffs_substitutions(self, doc):
        client = tag_rule(side_rule(doc, "client", "GET_DIFFS"), CLIENT)
        server = tag_rule(side_rule(doc, "server", "GET_DIFFS"), SERVER)
        sigma_req, sigma_resp = pair_rules(client, server)
        assert str(sigma_req) == "{∅, uid_s/uid_i}"
        assert str(sigma_resp) == "{diffs_i/getDiffs(diffss_s,uid_s)_s}"

    def test_get_doc_request_is_just_the_command(self, doc):
        (rule,) = compose_command(doc, "GET_DOC")
        assert str(rule.sigma_request) == "{∅}"
        assert str(rule.sigma_response) == "{uid_i/(luid_s+1)_s, doc_i/doc_s}"

    def test_commands_must_agree(self, doc):
        with pytest.raises(CommandMismatch):
            compose_global_rule(side_rule(doc, "client", "GET_DOC"), side_rule(doc, "server", "PUT_DIFFS"))

    def test_sides_checked(self, doc):
        with pytest.raises(ValueError):
            compose_global_rule(side_rule(doc, "server", "GET_DOC"), side_rule(doc, "client", "GET_DOC"))


class TestGlobalRule:
    @pytest.mark.parametrize("command", COMMANDS)
    def test_label_is_the_command(self, doc, command):
        (rule,) = compose_command(doc, command)
        assert rule.label == (command,)

    def test_conditions_carried(self, doc):
        (rule,) = compose_command(doc, "GET_DIFFS")
        guarded = {render(c.variable) for c in rule.conditions if isinstance(c, NotEpsilon)}
        assert guarded == {"uid_i", "uid_s"}

    def test_initial_slots(self, doc):
        (rule,) = compose_command(doc, "GET_DOC")
        assert rule.slot("client", "gUid", initial=True) == EPS

    def test_unknown_slot(self, doc):
        (rule,) = compose_command(doc, "GET_DOC")
        with pytest.raises(UnknownSlot):
            rule.slot("client", "gNothing")
        with pytest.raises(UnknownSlot):
            rule.slot("browser", "gUid")

    @pytest.mark.parametrize("command", COMMANDS)
    def test_order_robust(self, doc, command):
        (rule,) = compose_command(doc, command)
        assert order_robust_client_final(rule).client == rule.target[0]

    def test_display_keeps_foreign_tags(self):
        t = parse_term("applyDiffs(doc_i,getDiffs(diffss_s,uid_i)_s)_i")
        assert render(display_view(t, CLIENT)) == "applyDiffs(doc,getDiffs(diffss_s,uid_i)_s)"

    def test_abbreviation_folded(self, doc):
        t = parse_term("amendDoc(doc_s,uid_i,makeDiffs(doc_i,temp_i)_i)_s")
        assert render(display_view(t, SERVER, doc.abbreviation_map())) == "amendDoc(doc,uid_i,diffs_i)"


class TestSlots:
    def test_get_diffs_slots(self, doc):
        (rule,) = compose_command(doc, "GET_DIFFS")
        assert check_slot(rule, "client", "gWorkingDoc", slot("applyDiffs(doc,getDiffs(diffss_s,uid_i)_s)")).holds
        assert check_slot(rule, "server", "gDiffss", slot("resetDiffs(diffss,uid_i)")).holds

    def test_put_diffs_slots(self, doc):
        (rule,) = compose_command(doc, "PUT_DIFFS")
        abbreviations = doc.abbreviation_map()
        assert check_slot(rule, "server", "gDocument", slot("amendDoc(doc,uid_i,diffs_i)"), abbreviations).holds

    def test_negative_control(self, doc):
        (rule,) = compose_command(doc, "GET_DOC")
        verdict = check_slot(rule, "client", "gUid", EPS)
        assert not verdict.holds
        assert str(verdict).startswith("FAILS: client.gUid is (luid_s+1)_s")

    def test_eps_guard_refuses_pairing(self, doc):
        client = tag_rule(side_rule(doc, "client", "GET_DIFFS"), CLIENT)
        client = replace(client, request=replace(client.request, extras=(EPS,)))
        with pytest.raises(MatchFailure, match="eps"):
            compose_global_rule(client, tag_rule(side_rule(doc, "server", "GET_DIFFS"), SERVER))

    def test_composite_slot(self, doc):
        (rule,) = compose_command(doc, "GET_DOC")
        assert isinstance(rule.slot("client", "gUid"), Comp)
