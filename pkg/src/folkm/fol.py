"""Lexer, parser and AST for prenex first-order clauses.

Clause syntax (ASCII, one clause per line)::

    forall x forall y: A(x) and B(x,y) -> C(y)
    exists x: A(x) or not B(x)

Quantifier prefix first, then a quantifier-free body.  Connective
precedence, tightest first: ``not``, ``and``, ``or``, ``->``, ``<->``.
``and``/``or`` associate left, ``->``/``<->`` associate right;
parentheses override.  This grammar is a convention of this package,
not something inherent to the clause semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import (
    ArityMismatch,
    ClauseError,
    ClauseSyntaxError,
    UnboundVariable,
    UnknownCharacter,
    UnknownPredicate,
)

_KEYWORDS = {"forall", "exists", "and", "or", "not"}
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_WEIGHT_RE = re.compile(r"^\s*\[\s*w\s*=\s*([^\]\s]+)\s*\]")


class Token(NamedTuple):
    kind: str   # forall exists and or not ident lparen rparen comma colon implies iff
    text: str
    pos: int    # 0-based column in the source line


@dataclass(frozen=True)
class PredicateSignature:
    name: str
    arity: int
    kind: str  # "learnable" | "known"

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"predicate '{self.name}': arity must be >= 1")
        if self.kind not in ("learnable", "known"):
            raise ValueError(f"predicate '{self.name}': kind must be 'learnable' or 'known'")


class Quantifier(NamedTuple):
    kind: str  # "forall" | "exists"
    var: str


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Implies:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Iff:
    left: "Expr"
    right: "Expr"


Expr = Atom | Not | And | Or | Implies | Iff


@dataclass(frozen=True)
class ClauseAst:
    prefix: tuple[Quantifier, ...]
    body: Expr

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(q.var for q in self.prefix)


def tokenize(text: str) -> list[Token]:
    """Split one clause line into tokens; raises UnknownCharacter on junk."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isalpha() or c == "_":
            m = _IDENT_RE.match(text, i)
            word = m.group(0)
            tokens.append(Token(word if word in _KEYWORDS else "ident", word, i))
            i = m.end()
            continue
        if c == "(":
            tokens.append(Token("lparen", c, i))
        elif c == ")":
            tokens.append(Token("rparen", c, i))
        elif c == ",":
            tokens.append(Token("comma", c, i))
        elif c == ":":
            tokens.append(Token("colon", c, i))
        elif c == "-" and text[i : i + 2] == "->":
            tokens.append(Token("implies", "->", i))
            i += 2
            continue
        elif c == "<" and text[i : i + 3] == "<->":
            tokens.append(Token("iff", "<->", i))
            i += 3
            continue
        else:
            raise UnknownCharacter(f"unexpected character {c!r}", i)
        i += 1
    return tokens


class _Parser:
    def __init__(self, tokens: Sequence[Token], signatures: dict[str, PredicateSignature]):
        self.tokens = list(tokens)
        self.pos = 0
        self.signatures = signatures
        self.bound: list[str] = []

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ClauseSyntaxError("unexpected end of clause", self._end_pos())
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            got = tok.text if tok else "end of clause"
            raise ClauseSyntaxError(f"expected {kind!r}, got {got!r}", self._pos_of(tok))
        return self.advance()

    def _pos_of(self, tok: Token | None) -> int:
        return tok.pos if tok else self._end_pos()

    def _end_pos(self) -> int:
        return self.tokens[-1].pos + len(self.tokens[-1].text) if self.tokens else 0

    # clause := (quantifier ident)* ':' expr  |  expr
    def clause(self) -> ClauseAst:
        prefix = []
        tok = self.peek()
        while tok is not None and tok.kind in ("forall", "exists"):
            self.advance()
            var = self.expect("ident")
            if any(var.text == q.var for q in prefix):
                raise ClauseSyntaxError(f"variable '{var.text}' quantified twice", var.pos)
            prefix.append(Quantifier(tok.kind, var.text))
            tok = self.peek()
        if prefix:
            self.expect("colon")
        self.bound = [q.var for q in prefix]
        body = self.expr_iff()
        trailing = self.peek()
        if trailing is not None:
            raise ClauseSyntaxError(f"unexpected token {trailing.text!r}", trailing.pos)
        return ClauseAst(tuple(prefix), body)

    def expr_iff(self) -> Expr:
        left = self.expr_implies()
        tok = self.peek()
        if tok is not None and tok.kind == "iff":
            self.advance()
            return Iff(left, self.expr_iff())
        return left

    def expr_implies(self) -> Expr:
        left = self.expr_or()
        tok = self.peek()
        if tok is not None and tok.kind == "implies":
            self.advance()
            return Implies(left, self.expr_implies())
        return left

    def expr_or(self) -> Expr:
        left = self.expr_and()
        while (tok := self.peek()) is not None and tok.kind == "or":
            self.advance()
            left = Or(left, self.expr_and())
        return left

    def expr_and(self) -> Expr:
        left = self.expr_unary()
        while (tok := self.peek()) is not None and tok.kind == "and":
            self.advance()
            left = And(left, self.expr_unary())
        return left

    def expr_unary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ClauseSyntaxError("unexpected end of clause", self._end_pos())
        if tok.kind == "not":
            self.advance()
            return Not(self.expr_unary())
        if tok.kind == "lparen":
            self.advance()
            inner = self.expr_iff()
            self.expect("rparen")
            return inner
        if tok.kind == "ident":
            return self.atom()
        if tok.kind in ("forall", "exists"):
            raise ClauseSyntaxError(
                "quantifiers are only allowed in the clause prefix", tok.pos
            )
        raise ClauseSyntaxError(f"unexpected token {tok.text!r}", tok.pos)

    def atom(self) -> Atom:
        name = self.expect("ident")
        sig = self.signatures.get(name.text)
        if sig is None:
            raise UnknownPredicate(f"unknown predicate '{name.text}'", name.pos)
        self.expect("lparen")
        args = [self._variable()]
        while (tok := self.peek()) is not None and tok.kind == "comma":
            self.advance()
            args.append(self._variable())
        self.expect("rparen")
        if len(args) != sig.arity:
            raise ArityMismatch(sig.name, sig.arity, len(args), name.pos)
        return Atom(sig.name, tuple(args))

    def _variable(self) -> str:
        tok = self.expect("ident")
        if tok.text not in self.bound:
            raise UnboundVariable(f"variable '{tok.text}' is not quantified", tok.pos)
        return tok.text


def parse_clause(
    tokens: Sequence[Token], signatures: Sequence[PredicateSignature]
) -> ClauseAst:
    """Parse a token sequence into a validated prenex clause AST."""
    by_name = {s.name: s for s in signatures}
    return _Parser(tokens, by_name).clause()


def parse_clause_text(text: str, signatures: Sequence[PredicateSignature]) -> ClauseAst:
    return parse_clause(tokenize(text), signatures)


_PREC = {Iff: 0, Implies: 1, Or: 2, And: 3, Not: 4, Atom: 5}


def pretty(ast: ClauseAst) -> str:
    """Render a clause back to source; the result reparses to an equal AST."""
    parts = [f"{q.kind} {q.var}" for q in ast.prefix]
    head = " ".join(parts) + ": " if parts else ""
    return head + _pretty_expr(ast.body, 0)


def _pretty_expr(e: Expr, parent_prec: int) -> str:
    prec = _PREC[type(e)]
    if isinstance(e, Atom):
        s = f"{e.predicate}({','.join(e.args)})"
    elif isinstance(e, Not):
        s = "not " + _pretty_expr(e.child, prec)
    elif isinstance(e, And):
        s = _pretty_expr(e.left, prec) + " and " + _pretty_expr(e.right, prec + 1)
    elif isinstance(e, Or):
        s = _pretty_expr(e.left, prec) + " or " + _pretty_expr(e.right, prec + 1)
    elif isinstance(e, Implies):
        s = _pretty_expr(e.left, prec + 1) + " -> " + _pretty_expr(e.right, prec)
    else:
        s = _pretty_expr(e.left, prec + 1) + " <-> " + _pretty_expr(e.right, prec)
    if prec < parent_prec:
        return "(" + s + ")"
    return s


@dataclass(frozen=True)
class WeightedClause:
    ast: ClauseAst
    weight: float
    source: str
    line_no: int


def parse_clause_lines(
    lines: Sequence[str], signatures: Sequence[PredicateSignature]
) -> list[WeightedClause]:
    """Parse a clause file body: '#' comments, blank lines, optional [w=..] prefix."""
    out = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        weight = 1.0
        m = _WEIGHT_RE.match(line)
        if m:
            try:
                weight = float(m.group(1))
            except ValueError:
                raise ClauseSyntaxError(
                    f"bad clause weight {m.group(1)!r} on line {line_no}"
                ) from None
            if weight < 0:
                raise ClauseSyntaxError(f"clause weight must be >= 0 on line {line_no}")
            line = line[m.end():].strip()
        try:
            ast = parse_clause_text(line, signatures)
        except ClauseError as exc:
            exc.args = (f"line {line_no}: {exc.args[0]}",) + exc.args[1:]
            raise
        out.append(WeightedClause(ast, weight, line, line_no))
    return out
