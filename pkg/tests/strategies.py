from hypothesis import strategies as st

from alspec.http_model import SignedCookieSet
from alspec.terms import CLIENT, SERVER, SUCC, Comp, Const, SideTag, Var

CONSTANTS = ("GET_DOC", "GET_DIFFS", "eps", "0", "1", "A1")
FUNCTIONS = ("f", "getDiffs", "applyDiffs", SUCC)
COOKIES = ("c1", "c2", "c3", "c4")

tags = st.sampled_from([None, SERVER, CLIENT, SideTag("client", 2)])
variables = st.builds(Var, st.sampled_from(["uid", "doc", "temp", "luid", "x"]), tags)
constants = st.builds(Const, st.sampled_from(CONSTANTS))
elements = st.one_of(variables, constants)


def _composite(children):
    return st.builds(
        lambda fn, args, tag: Comp(fn, tuple(args[:2]) if fn == SUCC else tuple(args), tag),
        st.sampled_from(FUNCTIONS),
        st.lists(children, min_size=2, max_size=3),
        tags,
    )


terms = st.recursive(elements, _composite, max_leaves=8)


@st.composite
def matchable_pairs(draw):
    """A tuple of variables and constants and a tuple it matches: constants are copied,
    each variable gets a replacement that is reused on a repeat."""
    left = draw(st.lists(elements, max_size=6))
    chosen = {}
    right = []
    for e in left:
        if isinstance(e, Const):
            right.append(e)
        else:
            if e not in chosen:
                chosen[e] = draw(terms)
            right.append(chosen[e])
    return tuple(left), tuple(right)


stores = st.frozensets(st.sampled_from(COOKIES))


@st.composite
def signed_sets(draw):
    additions = draw(stores)
    removals = draw(stores) - additions
    return SignedCookieSet(additions, removals)
