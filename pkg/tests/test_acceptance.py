"""One test class per acceptance criterion; the terminal summary prints a PASS/FAIL line for each."""

import json
import random
import re
import time
from importlib import resources

import pytest
from hypothesis import given, settings

from alspec.composer import order_robust_client_final
from alspec.frontend import load_spec, render_spec
from alspec.frontend.cli import main
from alspec.frontend.runner import compose_command, fixture_text, read_spec
from alspec.http_model import SignedCookieSet, amend_cookie_store
from alspec.kts import explore, replay
from alspec.logic import check_quantified, eval_exists_path, path_satisfies
from alspec.logic.checker import all_assignments
from alspec.logic.syntax import QuantifiedFormula
from alspec.terms import apply_substitution, match_tuples, parse_term

from oracles import Oracle, random_kts, random_path_formula
from strategies import matchable_pairs, signed_sets, stores


def golden(name):
    text = resources.files("alspec.frontend").joinpath("fixtures", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def explore_doc(doc):
    return explore(doc.global_rules(), doc.initial_state(), doc.typed_variables(),
                   interpreted=doc.interpreted_symbols)


def final_states(rule) -> str:
    return rule.render(rule_abbreviations()).split("--> ", 1)[1]


def rule_abbreviations():
    return read_spec("quicdoc").abbreviation_map()


@pytest.mark.criterion(1)
class TestMatchingDerivations:
    @pytest.mark.parametrize("case", golden("quicdoc")["matches"], ids=lambda c: c["rendered"])
    def test_golden_rendering(self, case):
        start = time.perf_counter()
        left = [parse_term(t, case["constants"]) for t in case["left"]]
        right = [parse_term(t, case["constants"]) for t in case["right"]]
        sigma = match_tuples(left, right)
        elapsed = time.perf_counter() - start
        assert str(sigma) == case["rendered"]
        assert elapsed < 0.05


@pytest.mark.criterion(2)
class TestComposition:
    @pytest.mark.parametrize("command", ["GET_DOC", "GET_DIFFS", "PUT_DIFFS"])
    def test_final_states(self, command):
        doc = read_spec("quicdoc")
        start = time.perf_counter()
        (rule,) = compose_command(doc, command)
        elapsed = time.perf_counter() - start
        expected = golden("quicdoc")["composed"][command]
        assert final_states(rule) == f"({expected['client_final']},{expected['server_final']})"
        assert elapsed < 0.05

    def test_get_doc_abridged_form_differs(self):
        (rule,) = compose_command(read_spec("quicdoc"), "GET_DOC")
        abridged = golden("quicdoc")["composed"]["GET_DOC"]["abridged"]
        assert final_states(rule) != f"({abridged['client_final']},{abridged['server_final']})"

    def test_slot_assertions_meet_expectations(self, capsys):
        assert main(["check", "quicdoc"]) == 0
        out = capsys.readouterr().out
        assert out.count(" ok") == 10 and "MISMATCH" not in out


@pytest.fixture(scope="module")
def agreement():
    doc = read_spec("agreement")
    start = time.perf_counter()
    kts = explore_doc(doc)
    return doc, kts, time.perf_counter() - start


@pytest.mark.criterion(3)
class TestAgreementFormulae:
    def test_exploration_closes_at_three_states(self, agreement):
        doc, kts, elapsed = agreement
        assert kts.summary() == golden("agreement")["summary"]
        assert elapsed < 1.0

    @pytest.mark.parametrize("name", ["ideal_journey", "wrong_responses"])
    def test_formula_holds_with_replayable_witness(self, agreement, name):
        doc, kts, _ = agreement
        decl = doc.formula(name)
        start = time.perf_counter()
        verdict = check_quantified(kts, decl.formula, doc.constants, mode=decl.mode)
        assert time.perf_counter() - start < 1.0
        assert verdict.holds
        witness = verdict.witness
        assert witness.is_maximal(kts)
        for step in witness.steps:
            assert step.actions <= kts.transitions[(step.source, step.target)]
        assert path_satisfies(kts, witness, decl.formula.body.path, doc.constants)

    def test_first_witness_follows_ideal_journey(self, agreement):
        doc, kts, _ = agreement
        verdict = eval_exists_path(kts, kts.initial, doc.formula("ideal_journey").formula.body.path)
        shown = [s.render(doc.display_map) for s in verdict.witness.states()]
        assert shown[:4] == golden("agreement")["ideal_journey_states"]


@pytest.mark.criterion(4)
class TestVisitorsProperties:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_properties(self, n):
        start = time.perf_counter()
        doc = read_spec("visitors", {"N": n})
        kts = explore_doc(doc)
        assert len(kts.states) == 2 ** n and kts.closed
        assert kts.summary() == golden("visitors")["summaries"][str(n)]

        val = kts.interpretation
        assert [s for s in kts.states if val[s]["n"] == 0] == [kts.initial]
        assert val[kts.initial]["a"] == frozenset()
        for s in kts.states:
            assert len(val[s]["a"]) == val[s]["n"]
        for (s, t), actions in kts.transitions.items():
            a, a2 = val[s]["a"], val[t]["a"]
            if s == t:
                assert {act[0] for act in actions} <= a
            else:
                (added,) = a2 - a
                assert a <= a2 and added not in a and val[t]["n"] == val[s]["n"] + 1
                assert actions == {(added, f"B({val[t]['n']})")}

        def verdict(name):
            decl = doc.formula(name)
            return check_quantified(kts, decl.formula, doc.constants, domains=doc.domain_values(), mode=decl.mode)

        assert verdict("counter_bound").holds
        tight = verdict("counter_bound_tight")
        assert not tight.holds and tight.counterexample is not None
        assert val[tight.counterexample.states()[-1]]["n"] == n

        decl = doc.formula("no_double_increment")
        result = verdict("no_double_increment")
        assert not result.holds
        assert result.assignments == golden("visitors")["no_double_increment_assignments"][str(n)]
        body = QuantifiedFormula((), decl.formula.body)
        count = 0
        for env in all_assignments(kts, decl.formula, doc.domain_values()):
            count += 1
            assert not check_quantified(kts, body, env, mode=decl.mode).holds, env
        assert count == n * (n + 1) ** 2
        assert time.perf_counter() - start < 5.0 / 4


@pytest.mark.criterion(5)
class TestOracleEquivalence:
    def test_random_systems(self):
        rng = random.Random(20261015)
        checked = disagreements = 0
        for _ in range(500):
            kts, succ, valuation = random_kts(rng)
            oracle = Oracle(succ, valuation, max_len=8)
            for _ in range(2):
                pi = random_path_formula(rng, 4)
                for s in kts.states:
                    checked += 1
                    if eval_exists_path(kts, s, pi).holds != oracle.exists(s, pi):
                        disagreements += 1
        assert checked >= 1000
        assert disagreements == 0


@pytest.mark.criterion(6)
class TestPropertySuites:
    @settings(max_examples=1000, deadline=None)
    @given(matchable_pairs())
    def test_matching_soundness(self, pair):
        left, right = pair
        sigma = match_tuples(left, right)
        assert tuple(apply_substitution(t, sigma) for t in left) == right

    @given(stores, signed_sets())
    def test_cookie_amendment_algebra(self, store, signed):
        amended = amend_cookie_store(store, signed)
        assert signed.additions <= amended
        assert not (signed.removals & amended)
        assert amended - signed.additions <= store
        assert amend_cookie_store(amended, signed) == amended
        assert amend_cookie_store(store, SignedCookieSet()) == store

    @pytest.mark.parametrize("name,params", [("agreement", {}), ("visitors", {"N": 1}), ("visitors", {"N": 2}),
                                             ("visitors", {"N": 3}), ("visitors", {"N": 4})])
    def test_replay(self, name, params):
        doc = read_spec(name, params)
        assert replay(explore_doc(doc), doc.global_rules(), interpreted=doc.interpreted_symbols) == []

    @pytest.mark.parametrize("command", ["GET_DOC", "GET_DIFFS", "PUT_DIFFS"])
    def test_order_robustness(self, command):
        (rule,) = compose_command(read_spec("quicdoc"), command)
        assert order_robust_client_final(rule).client == rule.target[0]

    @pytest.mark.parametrize("name", ["agreement", "visitors", "quicdoc"])
    def test_round_trip(self, name):
        doc = load_spec(fixture_text(name))
        again = load_spec(render_spec(doc))
        assert again == doc
        assert render_spec(again) == render_spec(doc)


@pytest.mark.criterion(7)
class TestCliContract:
    @pytest.mark.parametrize("name", ["agreement", "visitors", "quicdoc"])
    def test_check_exits_zero(self, name, capsys):
        assert main(["check", name]) == 0

    @pytest.mark.parametrize("name", ["agreement", "visitors", "quicdoc"])
    def test_flipping_any_expectation_exits_one(self, name, tmp_path, capsys):
        text = fixture_text(name)
        found = list(re.finditer(r"expect (holds|fails)", text))
        assert found
        for m in found:
            flipped = "fails" if m.group(1) == "holds" else "holds"
            mutated = text[:m.start()] + f"expect {flipped}" + text[m.end():]
            path = tmp_path / f"{name}.alspec"
            path.write_text(mutated, encoding="utf-8")
            assert main(["check", str(path)]) == 1, m.group(0)

    @pytest.mark.parametrize("name,params,expected", [
        ("visitors", [], golden("visitors")["summaries"]["3"]),
        ("agreement", [], golden("agreement")["summary"]),
    ])
    def test_export_summary(self, name, params, expected, capsys, tmp_path):
        assert main(["export", name, "--dot", str(tmp_path / "out.dot")]) == 0
        assert capsys.readouterr().out.strip() == expected
