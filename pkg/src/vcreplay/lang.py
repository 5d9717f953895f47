"""Parser and AST for the Go-flavored mini language.

Commands: assignment, channel creation, close, spawn, select (plain sends
and receives are single-case selects), and a bounded ``repeat k { ... }``
that is unrolled at parse time.  Expressions are integers, variables, pairs
and fst/snd projections.  `//` starts a line comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class PairExpr:
    first: "Expr"
    second: "Expr"


@dataclass(frozen=True)
class Fst:
    inner: "Expr"


@dataclass(frozen=True)
class Snd:
    inner: "Expr"


Expr = Union[IntLit, Var, PairExpr, Fst, Snd]


# -- guards and commands ----------------------------------------------------


@dataclass(frozen=True)
class SendGuard:
    channel: str  # variable holding the channel
    value: Expr


@dataclass(frozen=True)
class RecvGuard:
    channel: str
    target: str | None  # assignment target, None for a bare receive


Guard = Union[SendGuard, RecvGuard]


@dataclass
class Assign:
    target: str
    value: Expr
    pos: tuple[int, int] = (0, 0)


@dataclass
class MakeChan:
    target: str
    cap: int
    pos: tuple[int, int] = (0, 0)


@dataclass
class Close:
    channel: str
    pos: tuple[int, int] = (0, 0)


@dataclass
class Spawn:
    body: list["Command"]
    pos: tuple[int, int] = (0, 0)


@dataclass
class Select:
    cases: list[tuple[Guard, list["Command"]]]
    default: list["Command"] | None = None
    pos: tuple[int, int] = (0, 0)
    bare: bool = False  # True when written as a plain send/receive


Command = Union[Assign, MakeChan, Close, Spawn, Select]
Program = list


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>//[^\n]*)
  | (?P<newline>\n)
  | (?P<arrow><-)
  | (?P<assign>:=)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}();:,])
    """,
    re.VERBOSE,
)

KEYWORDS = {"make", "chan", "spawn", "close", "select", "case", "default", "repeat", "fst", "snd"}


@dataclass
class _Tok:
    kind: str  # "arrow" | "assign" | "int" | "ident" | "punct" | "newline" | "eof"
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "newline":
            toks.append(_Tok("newline", text, line, col))
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                toks.append(_Tok(kind, text, line, col))
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self, skip_newlines: bool = True) -> _Tok:
        j = self.i
        while skip_newlines and self.toks[j].kind == "newline":
            j += 1
        return self.toks[j]

    def next(self, skip_newlines: bool = True) -> _Tok:
        while skip_newlines and self.toks[self.i].kind == "newline":
            self.i += 1
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise self.error(f"expected {want!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    # statements -------------------------------------------------------

    def parse_program(self) -> Program:
        prog = self.parse_statements(until={"eof"})
        self.expect("eof")
        return prog

    def parse_statements(self, until: set[str]) -> list[Command]:
        out: list[Command] = []
        while True:
            while self.at("punct", ";"):
                self.next()
            tok = self.peek()
            if tok.kind in until or (tok.kind == "punct" and tok.text in until):
                return out
            if tok.kind == "ident" and tok.text in ("case", "default") and "case" in until:
                return out
            out.extend(self.parse_statement())

    def parse_statement(self) -> list[Command]:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "ident" and tok.text == "spawn":
            self.next()
            return [Spawn(self.parse_block(), pos=pos)]
        if tok.kind == "ident" and tok.text == "close":
            self.next()
            self.expect("punct", "(")
            ch = self.expect("ident").text
            self.expect("punct", ")")
            return [Close(ch, pos=pos)]
        if tok.kind == "ident" and tok.text == "select":
            self.next()
            return [self.parse_select(pos)]
        if tok.kind == "ident" and tok.text == "repeat":
            self.next()
            count = int(self.expect("int").text)
            if count < 0:
                raise self.error("repeat count must be non-negative", tok)
            body = self.parse_block()
            return [cmd for _ in range(count) for cmd in body]
        if tok.kind == "arrow":  # bare receive: <-x
            self.next()
            ch = self.expect("ident").text
            return [Select([(RecvGuard(ch, None), [])], pos=pos, bare=True)]
        if tok.kind == "ident":
            if tok.text in KEYWORDS:
                raise self.error(f"unexpected keyword {tok.text!r}", tok)
            name = self.next().text
            nxt = self.peek()
            if nxt.kind == "arrow":  # send: x <- e
                self.next()
                value = self.parse_expr()
                return [Select([(SendGuard(name, value), [])], pos=pos, bare=True)]
            if nxt.kind == "assign":
                self.next()
                if self.at("arrow"):  # y := <-x
                    self.next()
                    ch = self.expect("ident").text
                    return [Select([(RecvGuard(ch, name), [])], pos=pos, bare=True)]
                if self.at("ident", "make"):
                    self.next()
                    self.expect("punct", "(")
                    self.expect("ident", "chan")
                    cap = 0
                    if self.at("punct", ","):
                        self.next()
                        cap = int(self.expect("int").text)
                        if cap < 0:
                            raise self.error("channel capacity must be non-negative", tok)
                    self.expect("punct", ")")
                    return [MakeChan(name, cap, pos=pos)]
                return [Assign(name, self.parse_expr(), pos=pos)]
            raise self.error(f"expected ':=' or '<-' after {name!r}", nxt)
        raise self.error(f"unexpected {tok.text or 'end of input'!r}", tok)

    def parse_block(self) -> list[Command]:
        self.expect("punct", "{")
        body = self.parse_statements(until={"}"})
        self.expect("punct", "}")
        return body

    def parse_select(self, pos: tuple[int, int]) -> Select:
        self.expect("punct", "{")
        cases: list[tuple[Guard, list[Command]]] = []
        default: list[Command] | None = None
        while True:
            if self.at("punct", "}"):
                self.next()
                break
            if self.at("eof"):
                raise self.error("unclosed select block")
            tok = self.next()
            if tok.kind == "ident" and tok.text == "case":
                guard = self.parse_guard()
                self.expect("punct", ":")
                body = self.parse_statements(until={"case", "}", "eof"})
                cases.append((guard, body))
            elif tok.kind == "ident" and tok.text == "default":
                if default is not None:
                    raise self.error("duplicate default case", tok)
                self.expect("punct", ":")
                default = self.parse_statements(until={"case", "}", "eof"})
            else:
                raise self.error(f"expected 'case' or 'default', found {tok.text!r}", tok)
        if not cases:
            raise self.error("select needs at least one case")
        return Select(cases, default=default, pos=pos)

    def parse_guard(self) -> Guard:
        if self.at("arrow"):  # case <-x:
            self.next()
            ch = self.expect("ident").text
            return RecvGuard(ch, None)
        name = self.expect("ident").text
        nxt = self.next()
        if nxt.kind == "arrow":  # case x <- e:
            return SendGuard(name, self.parse_expr())
        if nxt.kind == "assign":  # case y := <-x:
            self.expect("arrow")
            ch = self.expect("ident").text
            return RecvGuard(ch, name)
        raise self.error("malformed select case guard", nxt)

    # expressions ------------------------------------------------------

    def parse_expr(self) -> Expr:
        tok = self.next()
        if tok.kind == "int":
            return IntLit(int(tok.text))
        if tok.kind == "ident" and tok.text in ("fst", "snd"):
            self.expect("punct", "(")
            inner = self.parse_expr()
            self.expect("punct", ")")
            return Fst(inner) if tok.text == "fst" else Snd(inner)
        if tok.kind == "ident":
            if tok.text in KEYWORDS:
                raise self.error(f"unexpected keyword {tok.text!r} in expression", tok)
            return Var(tok.text)
        if tok.kind == "punct" and tok.text == "(":
            first = self.parse_expr()
            self.expect("punct", ",")
            second = self.parse_expr()
            self.expect("punct", ")")
            return PairExpr(first, second)
        raise self.error(f"expected expression, found {tok.text or 'end of input'!r}", tok)


def parse(source: str) -> Program:
    """Parse source text into a program (list of commands)."""
    return _Parser(source).parse_program()
