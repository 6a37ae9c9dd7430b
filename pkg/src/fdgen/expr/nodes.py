"""Expression tree with canonicalising constructors.

Nodes are immutable and hash-consed by value.  The public constructors
``add``, ``mul`` and ``power`` flatten, collect like terms and sort their
arguments so that structurally equal expressions compare equal; the raw
classes are only built directly by those constructors.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterator, Union

Rational = Fraction
Number = Union[Fraction, float]

ELEMENTARY = ("sin", "cos", "exp", "tanh", "sqrt")
DERIVATIVE_HEADS = ("Der", "Conservative", "Skew")
INDEX_HEADS = ("KroneckerDelta", "LeviCivita")
HEADS = DERIVATIVE_HEADS + INDEX_HEADS + ELEMENTARY


class Expr:
    __slots__ = ("_hash", "_str")
    rank = 0

    @property
    def args(self) -> tuple["Expr", ...]:
        return ()

    def _fields(self) -> tuple:
        raise NotImplementedError

    def rebuild(self, args: tuple["Expr", ...]) -> "Expr":
        return self

    def _init_hash(self) -> None:
        self._hash = hash((type(self).__name__,) + self._fields())
        self._str = None

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return self._hash == other._hash and self._fields() == other._fields()

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if self._str is None:
            self._str = to_source(self)
        return self._str

    def __repr__(self) -> str:
        return f"{type(self).__name__}({str(self)!r})"

    def sort_key(self) -> tuple:
        return (self.rank, str(self))

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __pow__(self, other):
        return power(self, other)

    def __neg__(self):
        return mul(-1, self)

    # traversal
    def walk(self) -> Iterator["Expr"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.args))

    def has(self, predicate: Callable[["Expr"], bool]) -> bool:
        return any(predicate(n) for n in self.walk())

    def transform(self, fn: Callable[["Expr"], "Expr | None"]) -> "Expr":
        """Rebuild bottom-up, replacing each node by ``fn(node)`` when not None."""
        args = self.args
        node = self
        if args:
            new_args = tuple(a.transform(fn) for a in args)
            if any(a is not b for a, b in zip(new_args, args)):
                node = self.rebuild(new_args)
        out = fn(node)
        return node if out is None else out


class RationalConst(Expr):
    __slots__ = ("value",)
    is_number = True

    def __init__(self, value: Fraction):
        self.value = Fraction(value)
        self._init_hash()

    def _fields(self):
        return (self.value,)


class FloatConst(Expr):
    __slots__ = ("value",)
    is_number = True

    def __init__(self, value: float):
        self.value = float(value)
        self._init_hash()

    def _fields(self):
        return (self.value,)


class EinsteinTerm(Expr):
    """A named symbol carrying alphabetic Einstein indices."""

    __slots__ = ("name", "indices", "is_constant", "is_coordinate", "is_time", "is_grid_index")
    rank = 1

    def __init__(self, name: str, indices: tuple[str, ...] = (), *, is_constant=False,
                 is_coordinate=False, is_time=False, is_grid_index=False):
        self.name = name
        self.indices = tuple(indices)
        self.is_constant = is_constant
        self.is_coordinate = is_coordinate
        self.is_time = is_time
        self.is_grid_index = is_grid_index
        self._init_hash()

    def _fields(self):
        return (self.name, self.indices, self.is_constant, self.is_coordinate, self.is_time,
                self.is_grid_index)

    @property
    def axis(self) -> int:
        """Axis of an expanded coordinate (``x1``) or grid index (``idx1``) term."""
        return int(self.name.lstrip("xid"))

    def with_indices(self, indices) -> "EinsteinTerm":
        return EinsteinTerm(self.name, indices, is_constant=self.is_constant,
                            is_coordinate=self.is_coordinate, is_time=self.is_time,
                            is_grid_index=self.is_grid_index)


class Idx(Expr):
    """Index argument of KroneckerDelta / LeviCivita: a letter or a component number."""

    __slots__ = ("value",)
    rank = 2

    def __init__(self, value):
        self.value = value
        self._init_hash()

    def _fields(self):
        return (self.value,)


class Field(Expr):
    """A grid field after index expansion, e.g. ``u`` with components ``(0,)`` -> ``u0``."""

    __slots__ = ("base", "components")
    rank = 2

    def __init__(self, base: str, components: tuple[int, ...] = ()):
        self.base = base
        self.components = tuple(components)
        self._init_hash()

    def _fields(self):
        # ``u0`` written directly and ``u_i`` expanded at i=0 are the same array
        return (self.name,)

    @property
    def name(self) -> str:
        return self.base + "".join(str(c) for c in self.components)


class Pow(Expr):
    __slots__ = ("base", "exp")
    rank = 3

    def __init__(self, base: Expr, exp: Expr):
        self.base = base
        self.exp = exp
        self._init_hash()

    @property
    def args(self):
        return (self.base, self.exp)

    def _fields(self):
        return (self.base, self.exp)

    def rebuild(self, args):
        return power(*args)


class Fn(Expr):
    __slots__ = ("head", "_args")
    rank = 4

    def __init__(self, head: str, args: tuple[Expr, ...]):
        self.head = head
        self._args = tuple(args)
        self._init_hash()

    @property
    def args(self):
        return self._args

    def _fields(self):
        return (self.head, self._args)

    def rebuild(self, args):
        return Fn(self.head, args)


class Derivative(Expr):
    """Unevaluated continuous derivative of ``operand`` along one axis.

    ``direction`` is an axis number or ``"t"``; ``degree`` is 1 or 2.  The
    nesting ``depth`` is bookkeeping only and takes no part in equality.
    """

    __slots__ = ("operand", "direction", "degree", "depth")
    rank = 5

    def __init__(self, operand: Expr, direction, degree: int = 1, depth: int | None = None):
        self.operand = operand
        self.direction = direction
        self.degree = degree
        self.depth = depth
        self._init_hash()

    @property
    def args(self):
        return (self.operand,)

    def _fields(self):
        return (self.operand, self.direction, self.degree)

    def rebuild(self, args):
        return Derivative(args[0], self.direction, self.degree)

    @property
    def directions(self) -> tuple:
        return (self.direction,) * self.degree


class Mul(Expr):
    __slots__ = ("_args",)
    rank = 6

    def __init__(self, args):
        self._args = tuple(args)
        self._init_hash()

    @property
    def args(self):
        return self._args

    def _fields(self):
        return self._args

    def rebuild(self, args):
        return mul(*args)


class Add(Expr):
    __slots__ = ("_args",)
    rank = 7

    def __init__(self, args):
        self._args = tuple(args)
        self._init_hash()

    @property
    def args(self):
        return self._args

    def _fields(self):
        return self._args

    def rebuild(self, args):
        return add(*args)


# ---------------------------------------------------------------------------
# numbers

def is_number(e) -> bool:
    return isinstance(e, (RationalConst, FloatConst))


def num(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a number")
    if isinstance(value, (int, Fraction)):
        return RationalConst(Fraction(value))
    if isinstance(value, float):
        return FloatConst(value)
    raise TypeError(f"cannot convert {value!r} to an expression")


sympify = num

ZERO = RationalConst(0)
ONE = RationalConst(1)
NEG_ONE = RationalConst(-1)
HALF = RationalConst(Fraction(1, 2))


def _nadd(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _nmul(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return float(a) * float(b)


def is_integer(e: Expr) -> bool:
    return isinstance(e, RationalConst) and e.value.denominator == 1


# ---------------------------------------------------------------------------
# canonical constructors

def _split_coeff(term: Expr) -> tuple[Number, Expr]:
    if isinstance(term, Mul) and is_number(term.args[0]):
        rest = term.args[1:]
        return term.args[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return Fraction(1), term


def _scale(core: Expr, c: Number) -> Expr:
    if c == 1:
        return core
    if isinstance(core, Mul):
        return Mul((num(c),) + core.args)
    return Mul((num(c), core))


def add(*terms) -> Expr:
    coeffs: dict[Expr, Number] = {}
    const: Number = Fraction(0)
    stack = [num(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if isinstance(t, Add):
            stack.extend(reversed(t.args))
        elif is_number(t):
            const = _nadd(const, t.value)
        else:
            c, core = _split_coeff(t)
            coeffs[core] = _nadd(coeffs[core], c) if core in coeffs else c
    items = [_scale(core, c) for core, c in coeffs.items() if c != 0]
    if const != 0:
        items.append(num(const))
    if not items:
        return ZERO
    if len(items) == 1:
        return items[0]
    items.sort(key=Expr.sort_key)
    return Add(items)


def mul(*factors) -> Expr:
    coeff: Number = Fraction(1)
    powers: dict[Expr, Expr] = {}
    stack = [num(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if isinstance(f, Mul):
            stack.extend(reversed(f.args))
        elif is_number(f):
            coeff = _nmul(coeff, f.value)
        else:
            base, e = (f.base, f.exp) if isinstance(f, Pow) else (f, ONE)
            powers[base] = add(powers[base], e) if base in powers else e
    if coeff == 0:
        return ZERO
    items: list[Expr] = []
    for base, e in powers.items():
        p = power(base, e)
        if is_number(p):
            coeff = _nmul(coeff, p.value)
        elif isinstance(p, Mul):
            for a in p.args:
                if is_number(a):
                    coeff = _nmul(coeff, a.value)
                else:
                    items.append(a)
        else:
            items.append(p)
    if coeff == 0:
        return ZERO
    if not items:
        return num(coeff)
    if coeff == 1 and len(items) == 1:
        return items[0]
    if len(items) == 1 and isinstance(items[0], Add):
        return add(*(mul(num(coeff), t) for t in items[0].args))
    items.sort(key=Expr.sort_key)
    if coeff != 1:
        items.insert(0, num(coeff))
    return Mul(items)


def power(base, exp) -> Expr:
    base, exp = num(base), num(exp)
    if is_number(exp):
        if exp.value == 0:
            return ONE
        if exp.value == 1:
            return base
    if is_number(base):
        bv = base.value
        if is_number(exp):
            ev = exp.value
            if isinstance(bv, Fraction) and is_integer(exp):
                if bv == 0 and ev < 0:
                    raise ZeroDivisionError("0 raised to a negative power")
                return RationalConst(bv ** int(ev))
            if isinstance(bv, float) or isinstance(ev, float):
                return FloatConst(float(bv) ** float(ev))
        if bv == 1:
            return ONE
    if is_integer(exp):
        if isinstance(base, Pow):
            return power(base.base, mul(base.exp, exp))
        if isinstance(base, Mul) and not _has_indices(base):
            # an indexed product squared is a contraction over the whole product
            return mul(*(power(f, exp) for f in base.args))
    return Pow(base, exp)


def _has_indices(e: Expr) -> bool:
    return any(isinstance(n, EinsteinTerm) and n.indices for n in e.walk())


def fn(head: str, *args) -> Expr:
    return Fn(head, tuple(num(a) for a in args))


def coeff_and_core(e: Expr) -> tuple[Number, Expr]:
    """Split ``e`` into its numeric coefficient and the remaining expression."""
    if is_number(e):
        return e.value, ONE
    return _split_coeff(e)


def _product_of_sums(factors) -> Expr:
    terms = [ONE]
    for f in factors:
        parts = f.args if isinstance(f, Add) else (f,)
        terms = [mul(t, p) for t in terms for p in parts]
    return add(*terms)


def distribute(e: Expr) -> Expr:
    """Multiply out every product of sums (used to compare expansions)."""
    def step(node):
        if isinstance(node, Mul):
            return _product_of_sums(node.args)
        if isinstance(node, Pow) and isinstance(node.base, Add) and is_integer(node.exp) \
                and node.exp.value > 1:
            return _product_of_sums((node.base,) * int(node.exp.value))
        return None
    return e.transform(step)


def free_symbols(e: Expr) -> set[str]:
    """Names of EinsteinTerm symbols (un-expanded) appearing in ``e``."""
    return {n.name for n in e.walk() if isinstance(n, EinsteinTerm)}


def fields_in(e: Expr) -> list[Field]:
    seen: dict[Field, None] = {}
    for n in e.walk():
        if isinstance(n, Field):
            seen.setdefault(n, None)
    return list(seen)


# ---------------------------------------------------------------------------
# source printer (grammar-valid for parser output)

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 10, 20, 30, 40


def _prec(e: Expr) -> int:
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, Mul):
        return _PREC_MUL
    if isinstance(e, Pow):
        return _PREC_MUL if (is_number(e.exp) and e.exp.value < 0) else _PREC_POW
    if isinstance(e, RationalConst):
        if e.value < 0:
            return _PREC_ADD
        return _PREC_ATOM if e.value.denominator == 1 else _PREC_MUL
    if isinstance(e, FloatConst):
        return _PREC_ADD if e.value < 0 else _PREC_ATOM
    return _PREC_ATOM


def _wrap(e: Expr, above: int) -> str:
    s = str(e)
    return f"({s})" if _prec(e) <= above else s


def _fmt_number(v: Number) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(v)


def _mul_source(e: Mul) -> str:
    coeff, core = _split_coeff(e)
    factors = core.args if isinstance(core, Mul) else (core,)
    numer, denom = [], []
    for f in factors:
        if isinstance(f, Pow) and is_number(f.exp) and f.exp.value < 0:
            denom.append(power(f.base, num(-f.exp.value)))
        else:
            numer.append(f)
    sign = ""
    if coeff < 0:
        sign, coeff = "-", -coeff
    parts = []
    if coeff != 1:
        parts.append(_fmt_number(coeff))
    parts.extend(_wrap(f, _PREC_MUL) for f in numer)
    text = "*".join(parts) if parts else "1"
    if denom:
        dtext = "*".join(_wrap(f, _PREC_MUL) for f in denom)
        if len(denom) > 1 or _prec(denom[0]) <= _PREC_MUL:
            dtext = f"({dtext})"
        text = f"{text}/{dtext}"
    return sign + text


def _is_negative_term(t: Expr) -> bool:
    if is_number(t):
        return t.value < 0
    c, _ = coeff_and_core(t)
    return c < 0


def to_source(e: Expr) -> str:
    if isinstance(e, (RationalConst, FloatConst)):
        return _fmt_number(e.value)
    if isinstance(e, EinsteinTerm):
        return e.name + "".join("_" + i for i in e.indices)
    if isinstance(e, Idx):
        return str(e.value)
    if isinstance(e, Field):
        return e.name
    if isinstance(e, Add):
        out = str(e.args[0])
        for t in e.args[1:]:
            if _is_negative_term(t):
                out += " - " + _wrap(mul(-1, t), _PREC_ADD)
            else:
                out += " + " + str(t)
        return out
    if isinstance(e, Mul):
        return _mul_source(e)
    if isinstance(e, Pow):
        if is_number(e.exp) and e.exp.value < 0:
            return _mul_source(Mul((e,)))
        exp = str(e.exp) if (is_integer(e.exp) and e.exp.value > 0) else f"({e.exp})"
        return f"{_wrap(e.base, _PREC_POW)}**{exp}"
    if isinstance(e, Fn):
        return f"{e.head}({', '.join(str(a) for a in e.args)})"
    if isinstance(e, Derivative):
        var = "t" if e.direction == "t" else f"x{e.direction}"
        return f"Derivative({e.operand}, {', '.join([var] * e.degree)})"
    raise TypeError(type(e))
