import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alspec.frontend.runner import explore_spec, read_spec
from alspec.kts import Kts, maximal_path_iter
from alspec.lexing import ParseError
from alspec.logic import (
    check_invariant,
    check_quantified,
    eval_exists_path,
    eval_state,
    parse_formula,
    path_satisfies,
)
from alspec.logic.checker import (
    TypeMismatch,
    UnboundConstant,
    UnboundedQuantifierDomain,
    UnknownVariable,
    UnsupportedFragment,
    action_matches,
)
from alspec.logic.syntax import (
    And,
    EqSucc,
    EqValue,
    Eventually,
    ExistsPath,
    LeqGlobal,
    Lift,
    Lit,
    Next,
    Not,
    PAnd,
    QuantifiedFormula,
    Ref,
    TrueF,
    TStep,
    Until,
    expand_derived,
    render_formula,
)

from oracles import VARIABLES, random_kts, random_path_formula


def parse(text, constants=(), **kw):
    return parse_formula(text, constants, variables={"x", "y", "n", "a"}, **kw)


@pytest.fixture(scope="module")
def visitors():
    doc = read_spec("visitors", {"N": 3})
    return doc, explore_spec(doc)


@pytest.fixture(scope="module")
def agreement():
    doc = read_spec("agreement")
    return doc, explore_spec(doc)


class TestParser:
    def test_invariant(self):
        f = parse("AG( n <= N-1 )", {"N"})
        assert f.body.state == LeqGlobal("n", Ref("N", -1))

    def test_successor_equation(self):
        f = parse("exists N1 : E( (n = N1) T[A1] (n = N1+1) )")
        assert f.prefix[0].name == "N1" and f.prefix[0].domain is None
        assert f.body.path == TStep(Lift(EqValue("n", Ref("N1"))), (Lit("A1"),), Lift(EqSucc("n", Ref("N1"))))

    def test_quantifier_chain_and_domains(self):
        f = parse("exists Ai in addr, N1 in 0..2, N2 in {0, 3} : true")
        assert [q.domain for q in f.prefix] == ["addr", (Lit(0), Lit(1), Lit(2)), (Lit(0), Lit(3))]

    def test_set_shorthand(self):
        f = parse("E( {} T[(1,I)] {c1} )", shorthand="c")
        assert f.body.path.left == Lift(EqValue("c", Lit(frozenset())))
        assert f.body.path.action == (Lit("1"), Lit("I"))

    def test_shorthand_needs_a_set_variable(self):
        with pytest.raises(ParseError):
            parse("E( {c1} )")

    def test_lifted_conjunction_collapses(self):
        assert parse("E( (x = 1) & !(y = 2) )").body.path == Lift(And(EqValue("x", Lit(1)), Not(EqValue("y", Lit(2)))))

    def test_until_right_associative(self):
        p = parse("E( x = 0 U x = 1 U x = 2 )").body.path
        assert isinstance(p, Until) and isinstance(p.right, Until)

    def test_step_binds_tighter_than_until(self):
        p = parse("E( x = 0 T[a] x = 1 U x = 2 )").body.path
        assert isinstance(p, Until) and isinstance(p.left, TStep)

    @pytest.mark.parametrize("text", ["E( U )", "AG(", "exists : true", "x <= ", "E( X[] true )"])
    def test_errors(self, text):
        with pytest.raises(ParseError):
            parse(text)

    @settings(max_examples=200)
    @given(st.integers(0, 2 ** 32))
    def test_render_parse_stable(self, seed):
        pi = random_path_formula(random.Random(seed), 4)
        f = QuantifiedFormula((), ExistsPath(pi))
        text = render_formula(f)
        again = render_formula(parse(text))
        assert again == text


class TestDerived:
    def test_eventually_is_strict(self):
        q = Lift(EqValue("n", Lit(3)))
        assert expand_derived(Eventually(q)) == Next(Until(Lift(TrueF()), q))

    def test_step(self):
        p, q = Lift(TrueF()), Lift(EqValue("n", Lit(1)))
        expanded = expand_derived(TStep(p, (Lit("A1"),), q))
        assert isinstance(expanded, PAnd)


class TestStateFormulae:
    def test_examples(self, visitors):
        doc, kts = visitors
        s0 = kts.initial
        assert eval_state(kts, s0, EqValue("n", Lit(0)))
        assert eval_state(kts, s0, EqValue("a", Lit(frozenset())))
        assert eval_state(kts, s0, LeqGlobal("n", Ref("N")), {"N": 3})
        assert not eval_state(kts, s0, EqSucc("n", Lit(0)))

    def test_errors(self, visitors):
        _, kts = visitors
        s0 = kts.initial
        with pytest.raises(UnboundConstant):
            eval_state(kts, s0, LeqGlobal("n", Ref("N")))
        with pytest.raises(UnknownVariable):
            eval_state(kts, s0, EqValue("m", Lit(0)))
        with pytest.raises(TypeMismatch):
            eval_state(kts, s0, EqValue("n", Lit(frozenset())))
        with pytest.raises(TypeMismatch):
            eval_state(kts, s0, LeqGlobal("a", Lit(1)))

    def test_action_prefix_match(self):
        assert action_matches((Lit("A1"),), ("A1", "B(1)"), {})
        assert action_matches((Lit("A1"), Lit("B(1)")), ("A1", "B(1)"), {})
        assert not action_matches((Lit("A1"), Lit("B(2)")), ("A1", "B(1)"), {})
        assert not action_matches((Ref("Ai"),), ("A2", "B(1)"), {"Ai": "A1"})


class TestExistsPath:
    def test_reaching_the_full_counter(self, visitors):
        doc, kts = visitors
        verdict = eval_exists_path(kts, kts.initial, Eventually(Lift(EqValue("n", Lit(3)))))
        assert verdict.holds
        assert [kts.interpretation[s]["n"] for s in verdict.witness.states()[:4]] == [0, 1, 2, 3]

    def test_eventually_excludes_now(self, visitors):
        _, kts = visitors
        # no transition leads back to the empty set
        assert not eval_exists_path(kts, kts.initial, Eventually(Lift(EqValue("n", Lit(0))))).holds
        assert eval_exists_path(kts, kts.initial, Until(Lift(TrueF()), Lift(EqValue("n", Lit(0))))).holds

    def test_welcome_not_reachable_in_one_step(self, agreement):
        doc, kts = agreement
        f = parse_formula("E( X[(wv,W)] true )", doc.constants)
        assert not eval_exists_path(kts, kts.initial, f.body.path).holds

    def test_dead_end_has_no_next(self):
        kts = Kts(("s",), {}, VARIABLES, {"s": {"x": 0, "y": 0}}, initial="s")
        assert not eval_exists_path(kts, "s", Next(Lift(TrueF()))).holds
        assert eval_exists_path(kts, "s", Lift(TrueF())).holds
        assert not eval_exists_path(kts, "s", Eventually(Lift(TrueF()))).holds

    def test_path_negation_unsupported(self, visitors):
        _, kts = visitors
        f = parse("E( !(X true) )")
        with pytest.raises(UnsupportedFragment):
            eval_exists_path(kts, kts.initial, f.body.path)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2 ** 32))
    def test_witness_satisfies_and_failures_have_no_path(self, seed):
        rng = random.Random(seed)
        kts, _, _ = random_kts(rng, max_states=6)
        pi = random_path_formula(rng, 4, allow_exists=False)
        verdict = eval_exists_path(kts, 0, pi)
        if verdict.holds:
            assert verdict.witness.is_maximal(kts)
            assert path_satisfies(kts, verdict.witness, pi)
        else:
            assert not any(path_satisfies(kts, p, pi) for p in maximal_path_iter(kts, 0, 6))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 32))
    def test_monotone_in_transitions(self, seed):
        rng = random.Random(seed)
        kts, _, _ = random_kts(rng)
        pi = random_path_formula(rng, 4, allow_exists=False)
        extra = dict(kts.transitions)
        s, t = rng.choice(kts.states), rng.choice(kts.states)
        extra[(s, t)] = extra.get((s, t), frozenset()) | {("a",)}
        bigger = Kts(kts.states, extra, kts.variables, kts.interpretation, kts.initial)
        if eval_exists_path(kts, 0, pi).holds:
            assert eval_exists_path(bigger, 0, pi).holds


class TestInvariantsAndQuantifiers:
    def test_invariant(self, visitors):
        doc, kts = visitors
        assert check_invariant(kts, LeqGlobal("n", Ref("N")), {"N": 3}).holds
        failed = check_invariant(kts, LeqGlobal("n", Ref("N", -1)), {"N": 3})
        assert not failed.holds and len(failed.counterexample) == 3

    def test_single_increment_witness(self, visitors):
        doc, kts = visitors
        decl = doc.formula("single_increment")
        verdict = check_quantified(kts, decl.formula, doc.constants, domains=doc.domain_values())
        assert verdict.holds and verdict.bindings == {"Ai": "A1", "N1": 0}
        assert path_satisfies(kts, verdict.witness, decl.formula.body.path, {**doc.constants, **verdict.bindings})

    def test_forall(self, visitors):
        doc, kts = visitors
        f = parse_formula("forall K in 0..3 : E( F (n = K) ) ", ("N",), variables={"n", "a"})
        # n = 0 is never reached again after the start
        verdict = check_quantified(kts, f)
        assert not verdict.holds and verdict.bindings == {"K": 0}

    def test_domain_inferred_from_observed_values(self, visitors):
        doc, kts = visitors
        f = parse_formula("exists K : n = K", variables={"n", "a"})
        assert check_quantified(kts, f).assignments == 1
        g = parse_formula("exists K : !(n = K)", variables={"n", "a"})
        assert check_quantified(kts, g, mode="sat").holds

    def test_undomained_quantifier(self, visitors):
        _, kts = visitors
        f = parse_formula("exists K : true")
        with pytest.raises(UnboundedQuantifierDomain):
            check_quantified(kts, f)

    def test_sat_mode(self, agreement):
        doc, kts = agreement
        body = doc.formula("wrong_responses").formula
        assert not check_quantified(kts, body).holds
        sat = check_quantified(kts, body, mode="sat")
        assert sat.holds and sat.state.render(doc.display_map) == "{①,②}"

    def test_verdict_render(self, visitors):
        doc, kts = visitors
        decl = doc.formula("counter_bound_tight")
        text = check_quantified(kts, decl.formula, doc.constants).render()
        assert text.startswith("FAILS") and "counterexample path:" in text
