"""Tokenizer and expression parsers shared by the guard language and the DSL."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InstsmError


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "str", "sym", "eof"
    value: str
    span: Span


class SyntaxErr(InstsmError):
    def __init__(self, message: str, span: Span):
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}")


_SYMBOLS = [
    ":=", "->", "..", "<=", ">=", "==", "!=", "||",
    "<", ">", "(", ")", "[", "]", "{", "}", ",", ";", ":", "-", "+", "*", "/", "=",
]
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*")
_INT = re.compile(r"[0-9]+")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        span = Span(line, col)
        if ch == '"':
            end = text.find('"', i + 1)
            if end < 0 or "\n" in text[i:end]:
                raise SyntaxErr("unterminated string", span)
            tokens.append(Token("str", text[i + 1:end], span))
            col += end + 1 - i
            i = end + 1
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), span))
        else:
            m = _INT.match(text, i)
            if m:
                tokens.append(Token("int", m.group(), span))
            else:
                for sym in _SYMBOLS:
                    if text.startswith(sym, i):
                        tokens.append(Token("sym", sym, span))
                        break
                else:
                    raise SyntaxErr(f"unexpected character {ch!r}", span)
        width = len(tokens[-1].value)
        i += width
        col += width
    tokens.append(Token("eof", "", Span(line, col)))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def lookahead(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, value: str, kind: str | None = None) -> bool:
        tok = self.peek
        if tok.kind in ("eof", "str") and kind != tok.kind:
            return False
        return tok.value == value and (kind is None or tok.kind == kind)

    def accept(self, value: str) -> Token | None:
        if self.at(value):
            return self.next()
        return None

    def expect(self, value: str) -> Token:
        tok = self.peek
        if not self.at(value):
            found = tok.value or "end of input"
            raise SyntaxErr(f"expected {value!r}, found {found!r}", tok.span)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek
        if tok.kind != "ident" or tok.value in KEYWORDS_EXPR:
            found = tok.value or "end of input"
            raise SyntaxErr(f"expected {what}, found {found!r}", tok.span)
        return self.next()

    def expect_int(self) -> int:
        neg = self.accept("-") is not None
        tok = self.peek
        if tok.kind != "int":
            raise SyntaxErr(f"expected integer, found {tok.value or 'end of input'!r}", tok.span)
        self.next()
        return -int(tok.value) if neg else int(tok.value)


KEYWORDS_EXPR = {"and", "or", "not", "true", "false"}
COMPARISONS = ("<", "<=", "==", "!=", ">=", ">")


def parse_int_expr(ts: TokenStream):
    from .guards import BinOp

    left = _parse_term(ts)
    while ts.peek.kind == "sym" and ts.peek.value in ("+", "-"):
        op = ts.next().value
        left = BinOp(op, left, _parse_term(ts))
    return left


def _parse_term(ts: TokenStream):
    from .guards import BinOp

    left = _parse_unary(ts)
    while ts.at("*", "sym"):
        ts.next()
        left = BinOp("*", left, _parse_unary(ts))
    return left


def _parse_unary(ts: TokenStream):
    from .guards import BinOp, Const, Var

    if ts.at("-", "sym"):
        ts.next()
        operand = _parse_unary(ts)
        if isinstance(operand, Const):
            return Const(-operand.value)
        return BinOp("-", Const(0), operand)
    if ts.at("(", "sym"):
        ts.next()
        inner = parse_int_expr(ts)
        ts.expect(")")
        return inner
    tok = ts.peek
    if tok.kind == "int":
        ts.next()
        return Const(int(tok.value))
    if tok.kind == "ident" and tok.value not in KEYWORDS_EXPR:
        ts.next()
        return Var(tok.value)
    raise SyntaxErr(f"expected integer expression, found {tok.value or 'end of input'!r}", tok.span)


def _parse_atom(ts: TokenStream):
    from .guards import Const, Var

    tok = ts.peek
    if tok.kind == "sym" and tok.value == "-" and ts.lookahead().kind == "int":
        ts.next()
        return Const(-int(ts.next().value))
    if tok.kind == "int":
        ts.next()
        return Const(int(tok.value))
    if tok.kind == "ident" and tok.value not in KEYWORDS_EXPR:
        ts.next()
        return Var(tok.value)
    raise SyntaxErr(f"expected variable or integer, found {tok.value or 'end of input'!r}", tok.span)


def parse_guard_expr(ts: TokenStream):
    from .guards import Or

    left = _parse_and(ts)
    while ts.at("or", "ident"):
        ts.next()
        left = Or(left, _parse_and(ts))
    return left


def _parse_and(ts: TokenStream):
    from .guards import And

    left = _parse_not(ts)
    while ts.at("and", "ident"):
        ts.next()
        left = And(left, _parse_not(ts))
    return left


def _parse_not(ts: TokenStream):
    from .guards import Not

    if ts.at("not", "ident"):
        ts.next()
        return Not(_parse_not(ts))
    return _parse_primary(ts)


def _parse_primary(ts: TokenStream):
    from .guards import BoolConst, Compare

    if ts.at("true", "ident"):
        ts.next()
        return BoolConst(True)
    if ts.at("false", "ident"):
        ts.next()
        return BoolConst(False)
    if ts.at("(", "sym"):
        ts.next()
        inner = parse_guard_expr(ts)
        ts.expect(")")
        return inner
    left = _parse_atom(ts)
    tok = ts.peek
    if tok.kind != "sym" or tok.value not in COMPARISONS:
        raise SyntaxErr(f"expected comparison operator, found {tok.value or 'end of input'!r}", tok.span)
    ts.next()
    return Compare(tok.value, left, _parse_atom(ts))
