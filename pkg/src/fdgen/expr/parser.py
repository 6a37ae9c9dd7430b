"""Recursive-descent parser for equation strings such as
``Eq(Der(rho, t), -Conservative(rho*u_j, x_j))``.

Precedence, loosest first: ``+ -``, unary minus, ``* /``, ``** ^`` (right
associative).  Integer literals are exact rationals; literals with a decimal
point or exponent are floats.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from ..errors import ArityError, ParseError
from .nodes import (DERIVATIVE_HEADS, ELEMENTARY, HEADS, INDEX_HEADS, EinsteinTerm, Expr,
                    Fn, Idx, RationalConst, FloatConst, mul, power, add)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)
_INDEX = re.compile(r"[a-z]")


@dataclass(frozen=True)
class Equation:
    lhs: Expr
    rhs: Expr

    def __str__(self) -> str:
        return f"Eq({self.lhs}, {self.rhs})"


def tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    source = source.rstrip()
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = source[pos:].lstrip()[:1]
            raise ParseError(f"unexpected character {bad!r} at offset {pos}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


def make_term(ident: str, constants: Iterable[str] = ()) -> EinsteinTerm:
    """Split ``ident`` at underscores into a base name and trailing index letters."""
    constants = set(constants)
    parts = ident.split("_")
    if any(p == "" for p in parts):
        raise ParseError(f"malformed index in {ident!r}")
    indices: list[str] = []
    while len(parts) > 1 and _INDEX.fullmatch(parts[-1]):
        indices.insert(0, parts.pop())
    for p in parts[1:]:
        if _INDEX.fullmatch(p) or p.isdigit():
            raise ParseError(f"malformed index {p!r} in {ident!r}")
    base = "_".join(parts)
    if base == "x" and indices:
        if len(indices) != 1:
            raise ParseError(f"coordinate {ident!r} must carry exactly one index")
        return EinsteinTerm(base, tuple(indices), is_coordinate=True)
    if re.fullmatch(r"x\d", base) and not indices:
        return EinsteinTerm(base, is_coordinate=True)
    if base == "t" and not indices:
        return EinsteinTerm(base, is_time=True)
    if re.fullmatch(r"idx\d", base) and not indices:
        return EinsteinTerm(base, is_grid_index=True)
    is_constant = (base in constants or ident in constants
                   or (re.fullmatch(r"delta\d", base) is not None and not indices))
    return EinsteinTerm(base, tuple(indices), is_constant=is_constant)


class _Parser:
    def __init__(self, source: str, constants: Iterable[str]):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.constants = set(constants)

    # token helpers
    def peek(self, value: str | None = None):
        if self.pos >= len(self.tokens):
            return None
        tok = self.tokens[self.pos]
        if value is not None and tok[1] != value:
            return None
        return tok

    def take(self, value: str | None = None):
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of input in {self.source!r}"
                             + (f", expected {value!r}" if value else ""))
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r} at offset {tok[2]}, found {tok[1]!r}")
        self.pos += 1
        return tok

    def done(self):
        if self.pos != len(self.tokens):
            tok = self.tokens[self.pos]
            raise ParseError(f"unexpected {tok[1]!r} at offset {tok[2]}")

    # grammar
    def sum(self) -> Expr:
        left = self.signed()
        while self.peek("+") or self.peek("-"):
            op = self.take()[1]
            right = self.signed()
            left = add(left, right) if op == "+" else add(left, mul(-1, right))
        return left

    def signed(self) -> Expr:
        if self.peek("-"):
            self.take()
            return mul(-1, self.signed())
        if self.peek("+"):
            self.take()
            return self.signed()
        return self.product()

    def product(self) -> Expr:
        left = self.factor()
        while self.peek("*") or self.peek("/"):
            op = self.take()[1]
            right = self.factor()
            left = mul(left, right) if op == "*" else mul(left, power(right, -1))
        return left

    def factor(self) -> Expr:
        if self.peek("-"):
            self.take()
            return mul(-1, self.factor())
        if self.peek("+"):
            self.take()
            return self.factor()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek("**") or self.peek("^"):
            self.take()
            return power(base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, text, at = tok
        if kind == "num":
            if any(c in text for c in ".eE"):
                return FloatConst(float(text))
            return RationalConst(int(text))
        if kind == "id":
            if self.peek("("):
                return self.call(text, at)
            return make_term(text, self.constants)
        if text == "(":
            inner = self.sum()
            self.take(")")
            return inner
        raise ParseError(f"unexpected {text!r} at offset {at}")

    def call(self, head: str, at: int) -> Expr:
        if head not in HEADS:
            raise ParseError(f"unknown operator head {head!r} at offset {at}")
        self.take("(")
        args = []
        if not self.peek(")"):
            args.append(self.sum())
            while self.peek(","):
                self.take()
                args.append(self.sum())
        self.take(")")
        if head in DERIVATIVE_HEADS and len(args) < 2:
            raise ArityError(f"{head} takes an operand and at least one variable")
        if head == "KroneckerDelta" and len(args) != 2:
            raise ArityError("KroneckerDelta takes exactly 2 index arguments")
        if head == "LeviCivita" and not 2 <= len(args) <= 3:
            raise ArityError("LeviCivita takes one index argument per dimension")
        if head in ELEMENTARY and len(args) != 1:
            raise ArityError(f"{head} takes exactly 1 argument")
        if head in INDEX_HEADS:
            args = [self._index_arg(a) for a in args]
        return Fn(head, tuple(args))

    @staticmethod
    def _index_arg(a: Expr) -> Idx:
        if isinstance(a, EinsteinTerm) and not a.indices and _INDEX.fullmatch(a.name):
            return Idx(a.name)
        if isinstance(a, RationalConst) and a.value.denominator == 1 and a.value >= 0:
            return Idx(int(a.value))
        raise ParseError(f"index argument must be a single letter or integer, got {a}")


def parse_expression(source: str, constants: Iterable[str] = ()) -> Expr:
    p = _Parser(source, constants)
    e = p.sum()
    p.done()
    return e


def parse_equation(source: str, constants: Iterable[str] = ()) -> Equation:
    """Parse ``Eq(<expr>, <expr>)``; names in ``constants`` are flagged constant."""
    p = _Parser(source, constants)
    tok = p.take()
    if tok[1] != "Eq":
        raise ParseError(f"equation must start with 'Eq(', got {tok[1]!r}")
    p.take("(")
    lhs = p.sum()
    p.take(",")
    rhs = p.sum()
    p.take(")")
    p.done()
    return Equation(lhs, rhs)
