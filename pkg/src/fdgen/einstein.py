"""Expansion of Einstein-notation equations into index-free component equations.

Repeated indices within a product (or between an operand and its
differentiation variable) are summed over ``0..ndim-1``; free indices turn an
equation into one scalar equation per component.  Derivative operators are
applied after index substitution:

* ``Der`` differentiates with the product/chain rules down to ``Derivative``
  leaves of fields,
* ``Conservative`` wraps its whole operand in a single leaf,
* ``Skew`` is rewritten into its split form before expansion.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from .errors import (ArityError, DimensionError, EinsteinIndexError, NestingError, ShapeError,
                     UnsupportedConstruct)
from .expr import (HALF, ONE, ZERO, Add, Derivative, EinsteinTerm, Equation, Expr, Field,
                   Fn, Idx, Mul, Pow, add, fn, is_integer, is_number, mul, power)


@dataclass(frozen=True)
class ExpansionContext:
    ndim: int

    def __post_init__(self):
        if self.ndim not in (1, 2, 3):
            raise DimensionError(f"ndim must be 1, 2 or 3, got {self.ndim}")

    @property
    def coordinates(self) -> tuple[str, ...]:
        return tuple(f"x{i}" for i in range(self.ndim))

    @property
    def time(self) -> str:
        return "t"


@dataclass(frozen=True)
class ExpandedEquation:
    """``d target/dt = rhs`` for prognostic equations, ``target = rhs`` for formulas."""

    target: Field
    rhs: Expr
    prognostic: bool = True

    @property
    def lhs(self) -> Expr:
        return Derivative(self.target, "t") if self.prognostic else self.target

    @property
    def name(self) -> str:
        return self.target.name

    def __str__(self) -> str:
        return f"Eq({self.lhs}, {self.rhs})"


# ---------------------------------------------------------------------------
# index structure

def _classify(counts: Counter, where: Expr) -> tuple[tuple[str, ...], tuple[str, ...]]:
    free, contracted = [], []
    for letter, n in counts.items():
        if n == 1:
            free.append(letter)
        elif n == 2:
            contracted.append(letter)
        else:
            raise EinsteinIndexError(f"index {letter!r} appears {n} times in {where}")
    return tuple(free), tuple(contracted)


@lru_cache(maxsize=None)
def index_structure(e: Expr) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(free, contracted-here) index letters of ``e``, in order of first appearance."""
    if isinstance(e, EinsteinTerm):
        return _classify(Counter(e.indices), e)
    if isinstance(e, Idx):
        return ((e.value,), ()) if isinstance(e.value, str) else ((), ())
    if isinstance(e, Add):
        first = None
        for t in e.args:
            f = set(index_structure(t)[0])
            if first is None:
                first, order = f, index_structure(t)[0]
            elif f != first:
                raise EinsteinIndexError(
                    f"terms of {e} carry different free indices {sorted(first)} vs {sorted(f)}")
        return order, ()
    if isinstance(e, Pow):
        base_free = index_structure(e.base)[0]
        if index_structure(e.exp)[0]:
            raise EinsteinIndexError(f"exponent of {e} carries indices")
        if base_free:
            if is_integer(e.exp) and e.exp.value == 2:
                return (), base_free
            raise EinsteinIndexError(f"indexed base raised to a power other than 2 in {e}")
        return (), ()
    if isinstance(e, Fn) and e.head in ("sin", "cos", "exp", "tanh", "sqrt"):
        return index_structure(e.args[0])[0], ()
    if isinstance(e, (Mul, Fn)):
        counts: Counter = Counter()
        for a in e.args:
            counts.update(index_structure(a)[0])
        return _classify(counts, e)
    return (), ()


def free_indices(e: Expr) -> tuple[str, ...]:
    return index_structure(e)[0]


def _assignments(letters, ndim):
    for values in itertools.product(range(ndim), repeat=len(letters)):
        yield dict(zip(letters, values))


# ---------------------------------------------------------------------------
# derivative semantics on expanded operands

def depends_on_space(e: Expr) -> bool:
    return e.has(lambda n: isinstance(n, (Field, Derivative))
                 or (isinstance(n, EinsteinTerm) and (n.is_coordinate or n.is_grid_index)))


def derivative_leaf(operand: Expr, axis: int) -> Expr:
    """Single derivative leaf of ``operand``; ``D(D(f;a);a)`` collapses to degree 2 and
    mixed nests of a plain leaf are ordered with the smaller axis innermost."""
    if not depends_on_space(operand):
        return ZERO
    if isinstance(operand, Derivative) and operand.degree == 1 and operand.direction != "t" \
            and not _has_derivative(operand.operand):
        inner = operand.operand
        if operand.direction == axis:
            return Derivative(inner, axis, 2)
        if operand.direction > axis:
            return Derivative(Derivative(inner, axis), operand.direction)
    return Derivative(operand, axis)


def _has_derivative(e: Expr) -> bool:
    return e.has(lambda n: isinstance(n, Derivative))


def differentiate(e: Expr, axis: int) -> Expr:
    """Derivative along ``axis`` using the product, quotient (as power) and chain rules."""
    if is_number(e) or isinstance(e, Idx):
        return ZERO
    if isinstance(e, EinsteinTerm):
        if e.is_coordinate:
            return ONE if e.axis == axis else ZERO
        if e.is_grid_index:
            raise UnsupportedConstruct("cannot differentiate a grid index symbol")
        return ZERO
    if isinstance(e, (Field, Derivative)):
        return derivative_leaf(e, axis)
    if isinstance(e, Add):
        return add(*(differentiate(t, axis) for t in e.args))
    if isinstance(e, Mul):
        terms = []
        for i, f in enumerate(e.args):
            df = differentiate(f, axis)
            if df != ZERO:
                terms.append(mul(*e.args[:i], df, *e.args[i + 1:]))
        return add(*terms)
    if isinstance(e, Pow):
        if depends_on_space(e.exp):
            raise UnsupportedConstruct(f"space-dependent exponent in {e}")
        db = differentiate(e.base, axis)
        if db == ZERO:
            return ZERO
        return mul(e.exp, power(e.base, add(e.exp, -1)), db)
    if isinstance(e, Fn):
        (u,) = e.args
        du = differentiate(u, axis)
        if du == ZERO:
            return ZERO
        outer = {
            "sin": lambda: fn("cos", u),
            "cos": lambda: mul(-1, fn("sin", u)),
            "exp": lambda: e,
            "tanh": lambda: add(1, mul(-1, power(e, 2))),
            "sqrt": lambda: mul(HALF, power(e, -1)),
        }
        if e.head not in outer:
            raise UnsupportedConstruct(f"cannot differentiate {e.head}")
        return mul(outer[e.head](), du)
    raise UnsupportedConstruct(f"cannot differentiate {type(e).__name__}")


def expand_skew(operand: Expr, variable: Expr) -> Expr:
    """Split form of ``d/dx_j [rho*phi*u_j]`` before index expansion:

        1/2 * (D(rho phi u_j) + u_j D(rho phi) + rho phi D(u_j))

    each ``D`` being a conservative (single-leaf) derivative.
    """
    if not (isinstance(variable, EinsteinTerm) and variable.is_coordinate and variable.indices):
        raise ShapeError(f"Skew needs an indexed coordinate variable such as x_j, got {variable}")
    j = variable.indices[0]
    factors = operand.args if isinstance(operand, Mul) else (operand,)
    velocity = [f for f in factors if isinstance(f, EinsteinTerm) and not f.is_constant
                and f.indices == (j,)]
    if len(velocity) != 1:
        raise ShapeError(f"Skew operand {operand} must contain exactly one factor indexed by {j}")
    u = velocity[0]
    rest = mul(*(f for f in factors if f is not u))

    def cons(x):
        return Fn("Conservative", (x, variable))
    return mul(HALF, add(cons(operand), mul(u, cons(rest)), mul(rest, cons(u))))


def resolve_nesting(e: Expr) -> Expr:
    """Annotate every Derivative with its nesting depth (0 = no derivative inside)."""
    def step(node):
        if isinstance(node, Derivative):
            inner = [n.depth for n in node.operand.walk() if isinstance(n, Derivative)]
            depth = 1 + max(inner) if inner else 0
            return Derivative(node.operand, node.direction, node.degree, depth=depth)
        return None
    return e.transform(step)


# ---------------------------------------------------------------------------
# expansion

class _Expander:
    def __init__(self, ctx: ExpansionContext):
        self.ndim = ctx.ndim

    def term(self, e: EinsteinTerm, env: dict) -> Expr:
        try:
            values = tuple(env[i] for i in e.indices)
        except KeyError as exc:
            raise EinsteinIndexError(f"index {exc.args[0]!r} of {e} is not bound") from None
        if e.is_coordinate:
            if e.indices:
                return EinsteinTerm(f"x{values[0]}", is_coordinate=True)
            if e.axis >= self.ndim:
                raise DimensionError(f"coordinate {e.name} in a {self.ndim}-D problem")
            return e
        if e.is_time:
            return e
        if e.is_grid_index:
            if e.axis >= self.ndim:
                raise DimensionError(f"grid index {e.name} in a {self.ndim}-D problem")
            return e
        if e.is_constant:
            return EinsteinTerm(e.name + "".join(str(v) for v in values), is_constant=True)
        return Field(e.name, values)

    def variable(self, v: Expr) -> int | str:
        if isinstance(v, EinsteinTerm) and v.is_time:
            return "t"
        if isinstance(v, EinsteinTerm) and v.is_coordinate and not v.indices:
            return v.axis
        raise NestingError(f"cannot differentiate with respect to {v}")

    def expand(self, e: Expr, env: dict) -> Expr:
        if is_number(e) or isinstance(e, (Field, Derivative)):
            return e
        if isinstance(e, EinsteinTerm):
            _, contracted = index_structure(e)
            if contracted:
                return add(*(self.term(e, {**env, **a}) for a in _assignments(contracted, self.ndim)))
            return self.term(e, env)
        if isinstance(e, Add):
            return add(*(self.expand(t, env) for t in e.args))
        if isinstance(e, Mul):
            _, contracted = index_structure(e)
            return add(*(mul(*(self.expand(f, {**env, **a}) for f in e.args))
                         for a in _assignments(contracted, self.ndim)))
        if isinstance(e, Pow):
            _, contracted = index_structure(e)
            exp = self.expand(e.exp, env)
            return add(*(power(self.expand(e.base, {**env, **a}), exp)
                         for a in _assignments(contracted, self.ndim)))
        if isinstance(e, Fn):
            return self.function(e, env)
        if isinstance(e, Idx):
            raise EinsteinIndexError(f"bare index {e} outside KroneckerDelta/LeviCivita")
        raise UnsupportedConstruct(f"cannot expand {type(e).__name__}")

    def index_value(self, a: Idx, env: dict) -> int:
        if isinstance(a.value, int):
            if a.value >= self.ndim:
                raise DimensionError(f"component {a.value} in a {self.ndim}-D problem")
            return a.value
        try:
            return env[a.value]
        except KeyError:
            raise EinsteinIndexError(f"index {a.value!r} is not bound") from None

    def function(self, e: Fn, env: dict) -> Expr:
        head = e.head
        if head in ("sin", "cos", "exp", "tanh", "sqrt"):
            return fn(head, self.expand(e.args[0], env))
        _, contracted = index_structure(e)
        if head == "LeviCivita" and len(e.args) != self.ndim:
            raise ArityError(f"LeviCivita needs {self.ndim} indices in {self.ndim}-D, got {e}")
        if head == "Skew":
            if len(e.args) != 2:
                raise ArityError("Skew takes an operand and a single variable")
            return self.expand(expand_skew(e.args[0], e.args[1]), env)
        out = []
        for a in _assignments(contracted, self.ndim):
            env2 = {**env, **a}
            if head == "KroneckerDelta":
                i, j = (self.index_value(x, env2) for x in e.args)
                out.append(ONE if i == j else ZERO)
            elif head == "LeviCivita":
                out.append(_levi_civita([self.index_value(x, env2) for x in e.args]))
            else:
                operand = self.expand(e.args[0], env2)
                axes = [self.variable(self.expand(v, env2)) for v in e.args[1:]]
                if "t" in axes:
                    raise NestingError(f"time derivative inside a right-hand side: {e}")
                for axis in axes:
                    operand = (differentiate(operand, axis) if head == "Der"
                               else derivative_leaf(operand, axis))
                out.append(operand)
        return add(*out)


def _levi_civita(values: list[int]) -> Expr:
    if len(set(values)) != len(values):
        return ZERO
    sign = 1
    v = list(values)
    for i in range(len(v)):
        while v[i] != i:
            j = v[i]
            v[i], v[j] = v[j], v[i]
            sign = -sign
    return ONE if sign > 0 else mul(-1, ONE)


def expand_expression(e: Expr, ctx: ExpansionContext, env: dict | None = None) -> Expr:
    """Expand an expression with no free indices (or with all of them bound in ``env``)."""
    env = dict(env or {})
    unbound = [i for i in free_indices(e) if i not in env]
    if unbound:
        raise EinsteinIndexError(f"free indices {unbound} are not bound in {e}")
    return _Expander(ctx).expand(e, env)


def expand(eq: Equation, ctx: ExpansionContext) -> list[ExpandedEquation]:
    """Expand one equation; free indices give one equation per component (lexicographic)."""
    lhs = eq.lhs
    if isinstance(lhs, Fn) and lhs.head == "Der":
        if len(lhs.args) != 2 or not (isinstance(lhs.args[1], EinsteinTerm) and lhs.args[1].is_time):
            raise NestingError(f"left-hand side must be a single time derivative, got {lhs}")
        target, prognostic = lhs.args[0], True
    else:
        target, prognostic = lhs, False
    if not isinstance(target, EinsteinTerm) or target.is_constant or target.is_coordinate \
            or target.is_time:
        raise ShapeError(f"equation target must be a field symbol, got {target}")
    free, contracted = index_structure(target)
    if contracted:
        raise EinsteinIndexError(f"target {target} repeats an index")
    rhs_free = free_indices(eq.rhs)
    if set(rhs_free) != set(free) and not (is_number(eq.rhs) and not rhs_free):
        raise EinsteinIndexError(
            f"free indices differ between sides: {sorted(free)} vs {sorted(rhs_free)} in {eq}")
    ex = _Expander(ctx)
    out = []
    for env in _assignments(free, ctx.ndim):
        field = ex.term(target, env)
        out.append(ExpandedEquation(field, resolve_nesting(ex.expand(eq.rhs, env)), prognostic))
    return out
