from __future__ import annotations

import string
from typing import Mapping, Sequence, Union

from ..errors import CycleError, ParseError
from .nodes import EinsteinTerm, Expr, Idx
from .parser import Equation, make_term

MAX_DEPTH = 8

Substitutions = Union[Mapping[str, Expr], Sequence[Equation]]


def index_letters(e: Expr) -> set[str]:
    letters = set()
    for n in e.walk():
        if isinstance(n, EinsteinTerm):
            letters.update(n.indices)
        elif isinstance(n, Idx) and isinstance(n.value, str):
            letters.add(n.value)
    return letters


def rename_indices(e: Expr, mapping: Mapping[str, str]) -> Expr:
    """Rename index letters simultaneously according to ``mapping``."""
    if not mapping:
        return e

    def step(node):
        if isinstance(node, EinsteinTerm) and node.indices:
            new = tuple(mapping.get(i, i) for i in node.indices)
            if new != node.indices:
                return node.with_indices(new)
        elif isinstance(node, Idx) and node.value in mapping:
            return Idx(mapping[node.value])
        return None
    return e.transform(step)


def _normalise(substitutions: Substitutions) -> list[tuple[EinsteinTerm, Expr]]:
    if isinstance(substitutions, Mapping):
        items = [(make_term(k) if isinstance(k, str) else k, v) for k, v in substitutions.items()]
    else:
        items = [(s.lhs, s.rhs) for s in substitutions]
    for key, _ in items:
        if not isinstance(key, EinsteinTerm):
            raise ParseError(f"substitution target must be a plain symbol, got {key}")
        if len(set(key.indices)) != len(key.indices):
            raise ParseError(f"substitution target {key} repeats an index")
    return items


def _fresh(avoid: set[str]):
    for c in string.ascii_lowercase:
        if c not in avoid and c not in "tx":
            avoid.add(c)
            return c
    raise ParseError("ran out of index letters")


def _apply_once(expr: Expr, subs: list[tuple[EinsteinTerm, Expr]]) -> Expr:
    table = {(k.name, len(k.indices)): (k, body) for k, body in subs}
    used = index_letters(expr)

    def step(node):
        if not isinstance(node, EinsteinTerm) or node.is_coordinate or node.is_time:
            return None
        hit = table.get((node.name, len(node.indices)))
        if hit is None:
            return None
        key, body = hit
        mapping = dict(zip(key.indices, node.indices))
        avoid = used | set(node.indices) | index_letters(body) | set(key.indices)
        for bound in sorted(index_letters(body) - set(key.indices)):
            mapping[bound] = _fresh(avoid)
        used.update(mapping.values())
        return rename_indices(body, mapping)
    return expr.transform(step)


def substitute_expression(expr: Expr, substitutions: Substitutions) -> Expr:
    subs = _normalise(substitutions)
    if not subs:
        return expr
    for _ in range(MAX_DEPTH + 1):
        new = _apply_once(expr, subs)
        if new == expr:
            return new
        expr = new
    raise CycleError(f"substitutions still expanding after depth {MAX_DEPTH}")


def substitute(eq: Equation, substitutions: Substitutions) -> Equation:
    """Inline substitution bodies, renaming their bound indices to fresh letters."""
    return Equation(substitute_expression(eq.lhs, substitutions),
                    substitute_expression(eq.rhs, substitutions))
