"""State/event temporal logic over amended transition systems."""

from .checker import (
    TypeMismatch,
    UnboundConstant,
    UnboundedQuantifierDomain,
    UnknownVariable,
    UnsupportedFragment,
    Verdict,
    action_matches,
    check_invariant,
    check_quantified,
    eval_exists_path,
    eval_state,
    path_satisfies,
)
from .parser import parse_formula
from .syntax import *  # noqa: F401,F403
