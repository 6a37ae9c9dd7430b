"""Lowering of evaluations into kernels over the pointwise IR."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ..errors import FootprintViolation, UnassignedDerivativeError, UnknownFieldError
from ..expr import (Add, Derivative, EinsteinTerm, Expr, Field, FloatConst, Fn, Mul, Pow,
                    RationalConst, add, coeff_and_core, evaluate, is_integer, is_number, mul,
                    power)
from ..grid import Grid, IterationRange, interior_range
from . import ir
from .evaluations import Evaluation, EvaluationSet
from .stencils import central_coefficients

DYNAMIC = ("t", "rkA", "rkB")


class ConstantPool:
    """Named real constants: physical inputs, grid spacings and folded values ``rc<n>``.

    Names in ``DYNAMIC`` change between stages and are never folded.
    """

    def __init__(self, values: Mapping[str, float] | None = None):
        self.values: dict[str, float] = {}
        self._folded: dict[object, str] = {}
        for name in DYNAMIC:
            self.values[name] = 0.0
        for k, v in (values or {}).items():
            self.values[k] = float(v)

    def __contains__(self, name):
        return name in self.values

    def __getitem__(self, name):
        return self.values[name]

    def set(self, name: str, value: float) -> None:
        self.values[name] = float(value)

    @property
    def names(self) -> list[str]:
        return list(self.values)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def fold(self, key, value: float) -> str:
        name = self._folded.get(key)
        if name is None:
            name = f"rc{len(self._folded)}"
            self._folded[key] = name
            self.values[name] = float(value)
        return name

    def fold_expr(self, e: Expr) -> str:
        return self.fold(("expr", str(e)), evaluate(e, self.values))

    def is_static_constant(self, e: Expr) -> bool:
        """True when ``e`` involves only numbers and non-dynamic named constants."""
        for n in e.walk():
            if isinstance(n, (Field, Derivative)):
                return False
            if isinstance(n, EinsteinTerm):
                if not n.is_constant or n.name in DYNAMIC:
                    return False
                if n.name not in self.values:
                    raise UnknownFieldError(f"constant {n.name!r} has no value")
        return True


@dataclass
class Kernel:
    name: str
    statements: tuple
    range: IterationRange
    reads: frozenset = frozenset()
    writes: frozenset = frozenset()
    read_writes: frozenset = frozenset()
    footprint: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name: str, statements: Sequence[ir.Assign], rng: IterationRange) -> "Kernel":
        ndim = rng.ndim
        read, written = set(), set()
        fp: dict[str, list[list[int]]] = {}
        for st in statements:
            for n in ir.walk(st.value):
                if isinstance(n, ir.Load):
                    read.add(n.array)
                    box = fp.setdefault(n.array, [[0, 0] for _ in range(ndim)])
                    for a, k in enumerate(n.offset):
                        box[a][0] = min(box[a][0], k)
                        box[a][1] = max(box[a][1], k)
            if isinstance(st.target, ir.Store):
                written.add(st.target.array)
        footprint = {k: tuple(tuple(b) for b in v) for k, v in sorted(fp.items())}
        return cls(name, tuple(statements), rng, frozenset(read - written),
                   frozenset(written - read), frozenset(read & written), footprint)

    @property
    def inputs(self) -> frozenset:
        return self.reads | self.read_writes

    @property
    def outputs(self) -> frozenset:
        return self.writes | self.read_writes

    def check_footprint(self, grid: Grid) -> None:
        """Raise FootprintViolation if any access leaves the padded extent."""
        for name, box in self.footprint.items():
            for a, (lo, hi) in enumerate(box):
                if self.range.lower[a] + lo < -grid.halo[a] or \
                        self.range.upper[a] - 1 + hi > grid.shape[a] + grid.halo[a] - 1:
                    raise FootprintViolation(
                        f"kernel {self.name} reads {name} outside the padded extent in "
                        f"direction {a}")
        for st in self.statements:
            for n in ir.walk(st.value):
                if isinstance(n, ir.Load) and n.array in self.outputs and any(n.offset):
                    raise FootprintViolation(
                        f"kernel {self.name} reads {n.array} at a neighbour while writing it")

    def renamed(self, mapping: Mapping[str, str]) -> "Kernel":
        if not mapping:
            return self

        def step(n):
            if isinstance(n, ir.Load) and n.array in mapping:
                return ir.Load(mapping[n.array], n.offset)
            return None
        stmts = []
        for st in self.statements:
            target = st.target
            if isinstance(target, ir.Store) and target.array in mapping:
                target = ir.Store(mapping[target.array])
            stmts.append(ir.Assign(target, ir.rebuild(st.value, step)))
        return Kernel.build(self.name, stmts, self.range)


class Lowerer:
    """Lower an index-free expression to IR at a fixed offset from the current point.

    Maximal constant sub-expressions become named folded constants; fields
    become loads; coordinates become index-derived values.
    """

    def __init__(self, pool: ConstantPool, ndim: int, locals_: Iterable[str] = ()):
        self.pool = pool
        self.ndim = ndim
        self.locals = set(locals_)

    def constant(self, e: Expr) -> ir.Node:
        if is_integer(e):
            return ir.Num(float(e.value))
        if isinstance(e, FloatConst):
            return ir.Num(e.value)
        if isinstance(e, EinsteinTerm):
            return ir.Const(e.name)
        return ir.Const(self.pool.fold_expr(e))

    def lower(self, e: Expr, shift: tuple[int, ...] | None = None) -> ir.Node:
        shift = shift or (0,) * self.ndim
        if self.pool.is_static_constant(e):
            return self.constant(e)
        if isinstance(e, Field):
            if e.name in self.locals:
                return ir.Local(e.name)
            return ir.Load(e.name, shift)
        if isinstance(e, Derivative):
            raise UnassignedDerivativeError(f"derivative {e} reached lowering without a temporary")
        if isinstance(e, EinsteinTerm):
            if e.is_time or e.name in DYNAMIC:
                return ir.Const(e.name)
            if e.is_coordinate:
                return ir.Coord(e.axis, shift[e.axis])
            if e.is_grid_index:
                return ir.GridIndex(e.axis, shift[e.axis])
            if e.name in self.locals:
                return ir.Local(e.name)
            raise UnknownFieldError(f"unexpanded symbol {e} in a kernel")
        if isinstance(e, Add):
            return self._add(e, shift)
        if isinstance(e, Mul):
            return self._mul(e.args, shift)
        if isinstance(e, Pow):
            return self._mul((e,), shift)
        if isinstance(e, Fn):
            return ir.Call(e.head, self.lower(e.args[0], shift))
        raise TypeError(f"cannot lower {type(e).__name__}")

    def _add(self, e: Add, shift) -> ir.Node:
        consts = [t for t in e.args if self.pool.is_static_constant(t)]
        terms = [t for t in e.args if not self.pool.is_static_constant(t)]
        acc: ir.Node | None = self.constant(add(*consts)) if consts else None
        for t in terms:
            c, core = coeff_and_core(t)
            negative = c == -1
            node = self.lower(core, shift) if negative else self.lower(t, shift)
            if acc is None:
                acc = ir.Neg(node) if negative else node
            else:
                acc = ir.Bin("-" if negative else "+", acc, node)
        return acc

    def _mul(self, factors, shift) -> ir.Node:
        consts, numer, denom = [], [], []
        for f in factors:
            if self.pool.is_static_constant(f):
                consts.append(f)
            elif isinstance(f, Pow) and is_number(f.exp) and f.exp.value < 0:
                denom.append(power(f.base, -f.exp.value))
            else:
                numer.append(f)
        negate = False
        items: list[ir.Node] = []
        if consts:
            c = mul(*consts)
            if isinstance(c, RationalConst) and c.value == -1:
                negate = True
            elif not (isinstance(c, RationalConst) and c.value == 1):
                items.append(self.constant(c))
        items += [self._factor(f, shift) for f in numer]
        if not items:
            items.append(ir.Num(1.0))
        out = ir.fold_left("*", items)
        if denom:
            out = ir.Bin("/", out, ir.fold_left("*", [self._factor(f, shift) for f in denom]))
        return ir.Neg(out) if negate else out

    def _factor(self, f: Expr, shift) -> ir.Node:
        if isinstance(f, Pow):
            base = self.lower(f.base, shift)
            if is_integer(f.exp) and f.exp.value > 0:
                return ir.fold_left("*", [base] * int(f.exp.value))
            if is_integer(f.exp):
                return ir.Bin("/", ir.Num(1.0), ir.fold_left("*", [base] * int(-f.exp.value)))
            if isinstance(f.exp, RationalConst) and f.exp.value == Fraction(1, 2):
                return ir.Call("sqrt", base)
            return ir.PowF(base, self.lower(f.exp, shift))
        return self.lower(f, shift)


def lower_derivative(leaf: Derivative, lowerer: Lowerer, accuracy: int, deltas_names=None,
                     shift: tuple[int, ...] | None = None) -> ir.Node:
    """Central-difference sum for a derivative whose operand holds no derivatives.

    Weights are folded with ``1/delta**degree`` into named constants, and the
    operand is evaluated inline at every stencil point.
    """
    ndim = lowerer.ndim
    shift = shift or (0,) * ndim
    axis, degree = leaf.direction, leaf.degree
    st = central_coefficients(degree, accuracy, axis)
    pool = lowerer.pool
    delta_name = f"delta{axis}"
    if delta_name not in pool:
        raise UnknownFieldError(f"grid spacing {delta_name} is not defined")

    def at(k):
        s = tuple(v + (k if a == axis else 0) for a, v in enumerate(shift))
        return lowerer.lower(leaf.operand, s)

    terms: list[ir.Node] = []
    if degree == 2 and st.weight(0) != 0:
        w0 = pool.fold(("stencil", degree, accuracy, 0, axis),
                       float(st.weight(0)) / pool[delta_name] ** degree)
        terms.append(ir.Bin("*", ir.Const(w0), at(0)))
    for k in range(1, st.width + 1):
        w = st.weight(k)
        if w == 0:
            continue
        rc = pool.fold(("stencil", degree, accuracy, k, axis),
                       float(w) / pool[delta_name] ** degree)
        pair = ir.Bin("-" if degree == 1 else "+", at(k), at(-k))
        terms.append(ir.Bin("*", ir.Const(rc), pair))
    return ir.fold_left("+", terms)


def lower_evaluation(ev: Evaluation, pool: ConstantPool, grid: Grid, accuracy: int) -> Kernel:
    lw = Lowerer(pool, grid.ndim)
    if ev.kind == "derivative":
        value = lower_derivative(ev.expression, lw, accuracy)
    else:
        value = lw.lower(ev.expression)
    rng = ev.range if ev.range is not None else ev.range_for(grid)
    return Kernel.build(f"k_{ev.target}", [ir.Assign(ir.Store(ev.target), value)], rng)


def _independent(run: Sequence[Kernel], k: Kernel) -> bool:
    written = set().union(*(r.outputs for r in run))
    read = set().union(*(r.inputs for r in run))
    return not (k.inputs & written or k.outputs & read or k.outputs & written)


def fuse_kernels(items: Sequence, pool: ConstantPool | None = None, grid: Grid | None = None,
                 accuracy: int | None = None, prefix: str = "fused") -> list[Kernel]:
    """Merge maximal runs of consecutive independent kernels with identical ranges.

    ``items`` may be Evaluations (lowered first, which needs pool/grid/accuracy)
    or already-built Kernels.
    """
    kernels = [lower_evaluation(x, pool, grid, accuracy) if isinstance(x, Evaluation) else x
               for x in items]
    runs: list[list[Kernel]] = []
    for k in kernels:
        if runs and runs[-1][0].range == k.range and _independent(runs[-1], k):
            runs[-1].append(k)
        else:
            runs.append([k])
    out = []
    for run in runs:
        if len(run) == 1:
            out.append(run[0])
        else:
            stmts = [s for k in run for s in k.statements]
            name = f"{prefix}_" + "_".join(k.name.removeprefix("k_") for k in run)
            if len(name) > 48:
                name = f"{prefix}_{run[0].name.removeprefix('k_')}_{len(run)}"
            out.append(Kernel.build(name, stmts, run[0].range))
    return out


def build_residual_kernels(expanded, evals: EvaluationSet, pool: ConstantPool,
                           grid: Grid) -> list[Kernel]:
    """One kernel per prognostic equation writing ``res_<name>`` over the interior."""
    lw = Lowerer(pool, grid.ndim)
    out = []
    for eq in expanded:
        rhs = evals.replace_derivatives(eq.rhs)
        out.append(Kernel.build(f"k_res_{eq.name}",
                                [ir.Assign(ir.Store(f"res_{eq.name}"), lw.lower(rhs))],
                                interior_range(grid)))
    return out


def build_assignment_kernel(name: str, assignments: Sequence[tuple[str, Expr]],
                            stored: Iterable[str], pool: ConstantPool, grid: Grid,
                            rng: IterationRange | None = None) -> Kernel:
    """Sequential per-point assignments (initial conditions); earlier targets become locals
    and names in ``stored`` are also written to their arrays."""
    stored = set(stored)
    lw = Lowerer(pool, grid.ndim)
    stmts = []
    for target, e in assignments:
        stmts.append(ir.Assign(ir.Local(target), lw.lower(e)))
        lw.locals.add(target)
    for target, _ in assignments:
        if target in stored:
            stmts.append(ir.Assign(ir.Store(target), ir.Local(target)))
    return Kernel.build(name, stmts, rng or interior_range(grid))


def pool_temporaries(schedule: Sequence[Kernel], prefix: str = "wk", out_prefix: str = "tmp",
                     exclude: Iterable[str] = ()) -> tuple[list[Kernel], dict]:
    """Share temporary arrays between kernels whose live intervals do not overlap.

    A temporary lives from the first kernel writing it to the last kernel
    reading it (inclusive).  Returns the renamed schedule and the mapping.
    """
    exclude = set(exclude)
    first, last = {}, {}
    for i, k in enumerate(schedule):
        for name in k.outputs:
            if name.startswith(prefix) and name not in exclude:
                first.setdefault(name, i)
                last[name] = max(last.get(name, i), i)
        for name in k.inputs:
            if name in first:
                last[name] = max(last.get(name, i), i)
    free_at: list[int] = []  # per physical array: index after which it is free
    mapping = {}
    for name in sorted(first, key=lambda n: (first[n], n)):
        slot = next((p for p, end in enumerate(free_at) if end < first[name]), None)
        if slot is None:
            slot = len(free_at)
            free_at.append(-1)
        free_at[slot] = last[name]
        mapping[name] = f"{out_prefix}{slot}"
    return [k.renamed(mapping) for k in schedule], mapping
