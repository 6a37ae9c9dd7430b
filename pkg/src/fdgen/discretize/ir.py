"""Pointwise kernel IR.

Every binary operation is explicit and printed fully parenthesised, so the
numba and C printers evaluate in the same association order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Load:
    array: str
    offset: tuple[int, ...]


@dataclass(frozen=True)
class Local:
    name: str


@dataclass(frozen=True)
class Coord:
    """Coordinate ``(index + offset) * delta`` along ``axis``."""
    axis: int
    offset: int


@dataclass(frozen=True)
class GridIndex:
    axis: int
    offset: int


@dataclass(frozen=True)
class Bin:
    op: str
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Neg:
    a: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    a: "Node"


@dataclass(frozen=True)
class PowF:
    a: "Node"
    b: "Node"


Node = Union[Num, Const, Load, Local, Coord, GridIndex, Bin, Neg, Call, PowF]


@dataclass(frozen=True)
class Store:
    array: str


@dataclass(frozen=True)
class Assign:
    target: Union[Store, Local]
    value: Node


def children(n: Node) -> tuple:
    if isinstance(n, Bin):
        return (n.a, n.b)
    if isinstance(n, PowF):
        return (n.a, n.b)
    if isinstance(n, (Neg, Call)):
        return (n.a,)
    return ()


def walk(n: Node) -> Iterator[Node]:
    stack = [n]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(children(x)))


def rebuild(n: Node, fn: Callable[[Node], Node | None]) -> Node:
    """Bottom-up rewrite; ``fn`` returns a replacement or None."""
    if isinstance(n, Bin):
        n = Bin(n.op, rebuild(n.a, fn), rebuild(n.b, fn))
    elif isinstance(n, PowF):
        n = PowF(rebuild(n.a, fn), rebuild(n.b, fn))
    elif isinstance(n, Neg):
        n = Neg(rebuild(n.a, fn))
    elif isinstance(n, Call):
        n = Call(n.fn, rebuild(n.a, fn))
    out = fn(n)
    return n if out is None else out


def shifted(n: Node, shift: tuple[int, ...]) -> Node:
    def step(x):
        if isinstance(x, Load):
            return Load(x.array, tuple(a + b for a, b in zip(x.offset, shift)))
        if isinstance(x, (Coord, GridIndex)):
            return type(x)(x.axis, x.offset + shift[x.axis])
        return None
    return rebuild(n, step)


def fold_left(op: str, items: list[Node]) -> Node:
    out = items[0]
    for x in items[1:]:
        out = Bin(op, out, x)
    return out


def float_literal(v: float) -> str:
    text = repr(float(v))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"non-finite constant {text}")
    if "." not in text and "e" not in text:
        text += ".0"
    return text


class Printer:
    """Shared structure of the numba and C printers."""

    def __init__(self, slot: Callable[[str], int], const_index: Callable[[str], int], ndim: int):
        self.slot = slot
        self.const_index = const_index
        self.ndim = ndim

    def flat_offset(self, offset: tuple[int, ...]) -> str:
        parts = []
        for axis, k in enumerate(offset):
            if k == 0:
                continue
            stride = "1" if axis == self.ndim - 1 else f"s{axis}"
            term = str(abs(k)) if stride == "1" else (stride if abs(k) == 1 else f"{abs(k)}*{stride}")
            parts.append(("+ " if k > 0 else "- ") + term)
        return "n" + ("" if not parts else " " + " ".join(parts))

    def expr(self, n: Node) -> str:
        if isinstance(n, Num):
            lit = float_literal(n.value)
            return f"({lit})" if lit.startswith("-") else lit
        if isinstance(n, Const):
            return f"c_{n.name}"
        if isinstance(n, Local):
            return f"l_{n.name}"
        if isinstance(n, Load):
            return self.load(n)
        if isinstance(n, Coord):
            return f"({self.to_float(self.index(n.axis, n.offset))} * c_delta{n.axis})"
        if isinstance(n, GridIndex):
            return self.to_float(self.index(n.axis, n.offset))
        if isinstance(n, Bin):
            return f"({self.expr(n.a)} {n.op} {self.expr(n.b)})"
        if isinstance(n, Neg):
            return f"(-{self.expr(n.a)})"
        if isinstance(n, Call):
            return self.call(n.fn, self.expr(n.a))
        if isinstance(n, PowF):
            return self.pow(self.expr(n.a), self.expr(n.b))
        raise TypeError(f"no lowering for {n!r}")

    def index(self, axis: int, offset: int) -> str:
        return f"(i{axis} - h{axis}{'' if offset == 0 else (f' + {offset}' if offset > 0 else f' - {-offset}')})"


class PythonPrinter(Printer):
    def load(self, n: Load) -> str:
        return f"st[{self.slot(n.array)}, {self.flat_offset(n.offset)}]"

    def to_float(self, s: str) -> str:
        return f"float{s}"

    def call(self, fn: str, a: str) -> str:
        return f"math.{fn}({a})"

    def pow(self, a: str, b: str) -> str:
        return f"({a} ** {b})"


class CPrinter(Printer):
    def load(self, n: Load) -> str:
        return f"st[{self.slot(n.array)}][{self.flat_offset(n.offset)}]"

    def to_float(self, s: str) -> str:
        return f"(double){s}"

    def call(self, fn: str, a: str) -> str:
        return f"{fn}({a})"

    def pow(self, a: str, b: str) -> str:
        return f"pow({a}, {b})"
