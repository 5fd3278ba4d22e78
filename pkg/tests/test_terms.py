import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alspec.lexing import ParseError
from alspec.terms import (
    CLIENT,
    EPS,
    NULL,
    SERVER,
    Binding,
    Comp,
    Const,
    MatchFailure,
    SideTag,
    Substitution,
    Var,
    apply_substitution,
    compose_apply,
    make_set,
    match_elements,
    match_pattern,
    match_tuples,
    parse_term,
    render,
)

from strategies import CONSTANTS, matchable_pairs, terms

uid_s, uid_i = Var("uid", SERVER), Var("uid", CLIENT)


class TestMatchElements:
    def test_variable_takes_variable(self):
        assert match_elements(uid_s, uid_i) == Binding(uid_s, uid_i)

    def test_variable_takes_constant(self):
        assert match_elements(uid_s, EPS) == Binding(uid_s, EPS)

    def test_variable_takes_composite(self):
        t = Comp("getDiffs", (Var("diffss", SERVER), uid_s), SERVER)
        assert match_elements(Var("diffs", CLIENT), t) == Binding(Var("diffs", CLIENT), t)

    def test_equal_constants_give_null(self):
        assert match_elements(Const("GET_DOC"), Const("GET_DOC")) is NULL

    @pytest.mark.parametrize("left,right", [
        (Const("GET_DOC"), Const("PUT_DIFFS")),
        (Const("GET_DOC"), uid_i),
        (Comp("f", (uid_s,)), Comp("f", (uid_i,))),
        (Comp("f", ()), uid_i),
    ])
    def test_everything_else_fails(self, left, right):
        with pytest.raises(MatchFailure):
            match_elements(left, right)


class TestMatchTuples:
    def test_empty(self):
        assert match_tuples((), ()) == Substitution()

    def test_length_mismatch(self):
        with pytest.raises(MatchFailure):
            match_tuples((uid_s,), ())

    def test_identical_duplicates_merge(self):
        sigma = match_tuples((uid_s, uid_s), (uid_i, uid_i))
        assert str(sigma) == "{uid_s/uid_i}"

    def test_conflicting_duplicates_fail(self):
        with pytest.raises(MatchFailure):
            match_tuples((uid_s, uid_s), (uid_i, EPS))

    @settings(max_examples=300)
    @given(matchable_pairs())
    def test_sound(self, pair):
        left, right = pair
        sigma = match_tuples(left, right)
        assert tuple(apply_substitution(t, sigma) for t in left) == right

    @given(st.lists(terms, max_size=4), st.lists(terms, max_size=4))
    def test_partial(self, left, right):
        # arbitrary pairs either fail cleanly or match soundly
        try:
            sigma = match_tuples(left, right)
        except MatchFailure:
            return
        assert [apply_substitution(t, sigma) for t in left] == right


class TestSubstitution:
    def test_double_binding_rejected(self):
        with pytest.raises(ValueError):
            Substitution((Binding(uid_s, EPS), Binding(uid_s, uid_i)))

    def test_simultaneous(self):
        x, y = Var("x"), Var("y")
        swapped = apply_substitution(Comp("f", (x, y)), {x: y, y: x})
        assert swapped == Comp("f", (y, x))

    @given(terms, terms, terms)
    def test_homomorphic(self, a, b, r):
        sigma = {uid_s: r}
        whole = apply_substitution(Comp("f", (a, b), SERVER), sigma)
        assert whole == Comp("f", (apply_substitution(a, sigma), apply_substitution(b, sigma)), SERVER)

    def test_compose_apply_last_first(self):
        # GET_DIFFS client final state
        diffs_i = Var("diffs", CLIENT)
        got = Comp("getDiffs", (Var("diffss", SERVER), uid_s), SERVER)
        sigma_req = Substitution((NULL, Binding(uid_s, uid_i)))
        sigma_resp = Substitution((Binding(diffs_i, got),))
        t = Comp("applyDiffs", (Var("doc", CLIENT), diffs_i), CLIENT)
        assert render(compose_apply(t, [sigma_req, sigma_resp])) == "applyDiffs(doc_i,getDiffs(diffss_s,uid_i)_s)_i"
        assert render(compose_apply(t, [sigma_resp, sigma_req])) == "applyDiffs(doc_i,getDiffs(diffss_s,uid_s)_s)_i"

    @given(terms)
    def test_empty_is_identity(self, t):
        assert compose_apply(t, [Substitution(), Substitution()]) == t


class TestMatchPattern:
    def test_descends_and_checks_repeats(self):
        x = Var("x")
        assert match_pattern(Comp("f", (x, x)), Comp("f", (EPS, EPS))) == {x: EPS}
        assert match_pattern(Comp("f", (x, x)), Comp("f", (EPS, Const("1")))) is None

    def test_ground_sets_compare_as_sets(self):
        a, b = Const("A1"), Const("A2")
        assert match_pattern(Comp("{}", (b, a)), make_set([a, b])) == {}


class TestRenderParse:
    @pytest.mark.parametrize("text", [
        "uid_s", "getDiffs(diffss_s,uid_s)_s", "(luid_s+1)_s", "luid+1", "j_i(eps,eps,eps)", "x_i2", "{A1,A2}",
    ])
    def test_examples_round_trip(self, text):
        assert render(parse_term(text, {"A1", "A2"})) == text

    def test_tag_is_identity(self):
        assert parse_term("uid_s") != parse_term("uid_i")
        assert parse_term("uid_i2").tag == SideTag("client", 2)

    def test_constants(self):
        assert parse_term("GET_DOC", {"GET_DOC"}) == Const("GET_DOC")
        assert parse_term("eps") == EPS
        assert isinstance(parse_term("GET_DOC"), Var)

    def test_bad_input(self):
        with pytest.raises(ParseError):
            parse_term("f(a,")

    @given(terms)
    def test_round_trip(self, t):
        assert parse_term(render(t), CONSTANTS) == t

    def test_display(self):
        assert render(make_set([Const("c1"), Const("c2")]), {"c1": "①"}) == "{①,c2}"
