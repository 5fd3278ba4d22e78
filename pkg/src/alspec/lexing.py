"""Tokenizer shared by the term, formula and spec-file parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    """Raised on malformed input; carries a 1-based line/column and the expected tokens."""

    def __init__(self, message: str, line: int = 1, column: int = 1, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        where = f"{line}:{column}"
        extra = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{where}: {message}{extra}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


# Order matters: longer operators first.
_TOKEN_SPEC = [
    ("WS", r"[ \t\r]+"),
    ("NL", r"\n"),
    ("COMMENT", r"#[^\n]*"),
    ("STRING", r'"[^"\n]*"'),
    ("OPEN_ARROW", r"--\["),
    ("CLOSE_ARROW", r"\]-->"),
    ("ELLIPSIS", r"\.\.\."),
    ("DOTDOT", r"\.\."),
    ("LE", r"<="),
    ("NE", r"!="),
    ("EMPTYSET", r"∅"),
    ("IDENT", r"[A-Za-z0-9_]+"),
    ("OP", r"[=(){}\[\],/|&!+\-:;.]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))


def tokenize(text: str, *, line_offset: int = 0) -> list[Token]:
    """Split ``text`` into tokens, dropping whitespace and ``#`` comments."""
    tokens: list[Token] = []
    line, line_start = 1 + line_offset, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        assert kind is not None
        if kind == "NL":
            line += 1
            line_start = m.end()
        elif kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/expect helpers."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @classmethod
    def of(cls, text: str, **kwargs) -> "TokenStream":
        return cls(tokenize(text, **kwargs))

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, text: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind != "STRING" and tok.text == text and tok.kind != "EOF"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}", (text,))
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail("expected an identifier", ("<identifier>",))
        return self.next()

    def at_end(self) -> bool:
        return self.peek().kind == "EOF"

    def expect_end(self) -> None:
        if not self.at_end():
            self.fail("unexpected trailing input", ("<end of input>",))

    def fail(self, message: str, expected: tuple[str, ...] = ()) -> None:
        tok = self.peek()
        found = tok.text if tok.kind != "EOF" else "end of input"
        raise ParseError(f"{message}, found {found!r}", tok.line, tok.column, expected)
