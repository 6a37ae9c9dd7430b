"""Evaluation graph: one evaluation per formula and per distinct derivative leaf.

Derivative leaves get temporary arrays ``wk<n>``.  A nested derivative's
inner leaf becomes its own evaluation whose range is widened into the halo by
the outer stencil's half-width, so the outer stencil never needs one-sided
differences.  Ordering is by dependency level (a topological sort).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..einstein import ExpandedEquation
from ..errors import CycleError, FootprintViolation, UnknownFieldError
from ..expr import Derivative, EinsteinTerm, Expr, Field
from ..grid import Grid, IterationRange, interior_range


@dataclass
class Evaluation:
    target: str
    expression: Expr
    kind: str  # "formula" or "derivative"
    dependencies: frozenset
    widen: tuple[int, ...] = ()
    static: bool = False
    level: int = 0
    range: IterationRange | None = None
    width: int = 0  # stencil half-width of a derivative evaluation

    def range_for(self, grid: Grid) -> IterationRange:
        return interior_range(grid).widened(self.widen)


@dataclass
class EvaluationSet:
    evaluations: list[Evaluation]
    temporaries: dict = field(default_factory=dict)  # Derivative leaf -> temp name
    need: dict = field(default_factory=dict)
    required_halo: tuple[int, ...] = ()
    prognostics: tuple[str, ...] = ()

    def replace_derivatives(self, e: Expr) -> Expr:
        from ..errors import UnassignedDerivativeError

        def step(node):
            if isinstance(node, Derivative):
                name = self.temporaries.get(node)
                if name is None:
                    raise UnassignedDerivativeError(f"no temporary holds {node}")
                return Field(name)
            return None
        return _replace_outermost(e, step)

    def __iter__(self):
        return iter(self.evaluations)

    def __len__(self):
        return len(self.evaluations)


def _replace_outermost(e: Expr, fn) -> Expr:
    """Replace the outermost matching nodes without descending into them."""
    out = fn(e)
    if out is not None:
        return out
    args = e.args
    if not args:
        return e
    new = tuple(_replace_outermost(a, fn) for a in args)
    if all(a is b for a, b in zip(new, args)):
        return e
    return e.rebuild(new)


def _reads(e: Expr) -> set[str]:
    return {n.name for n in e.walk() if isinstance(n, Field)}


def _uses_time(e: Expr) -> bool:
    return e.has(lambda n: isinstance(n, EinsteinTerm) and n.is_time)


def build_evaluations(expanded: Sequence[ExpandedEquation], formulas: Sequence[ExpandedEquation],
                      grid: Grid | None, spatial_accuracy: int, *, ndim: int | None = None,
                      roots: Iterable[Expr] | None = None, prune: bool = False,
                      temp_prefix: str = "wk", extra_fields: Iterable[str] = ()) -> EvaluationSet:
    """Build and order evaluations.

    ``roots`` are the expressions consumed at interior points after all
    evaluations (by default the right-hand sides of ``expanded``).
    ``extra_fields`` are arrays that exist without an evaluation (beyond the
    prognostics), e.g. diagnostic inputs.  Without a grid, ``ndim`` must be
    given and ranges are left unset.
    """
    m = spatial_accuracy // 2
    prognostics = tuple(eq.name for eq in expanded)
    formula_names = [f.name for f in formulas]
    known = set(prognostics) | set(formula_names) | set(extra_fields)
    temporaries: dict[Derivative, str] = {}
    canonical: dict[Derivative, str] = {}
    evals: list[Evaluation] = []

    def temp_for(leaf: Derivative) -> str:
        if leaf in temporaries:
            return temporaries[leaf]
        operand = _replace_outermost(
            leaf.operand, lambda n: Field(temp_for(n)) if isinstance(n, Derivative) else None)
        key = Derivative(operand, leaf.direction, leaf.degree)
        name = canonical.get(key)
        if name is None:
            name = f"{temp_prefix}{len(canonical)}"
            canonical[key] = name
            evals.append(Evaluation(name, key, "derivative", frozenset(_reads(operand)), width=m))
        temporaries[leaf] = name
        return name

    def collect(e: Expr) -> Expr:
        return _replace_outermost(
            e, lambda n: Field(temp_for(n)) if isinstance(n, Derivative) else None)

    formula_evals = []
    for f in formulas:
        rhs = collect(f.rhs)
        formula_evals.append(Evaluation(f.name, rhs, "formula", frozenset(_reads(rhs))))
    evals = formula_evals + evals
    root_exprs = list(roots) if roots is not None else [eq.rhs for eq in expanded]
    root_reads: set[str] = set()
    for r in root_exprs:
        root_reads |= _reads(collect(r))

    by_target = {ev.target: ev for ev in evals}
    if len(by_target) != len(evals):
        dup = [n for n in formula_names if formula_names.count(n) > 1]
        raise CycleError(f"field defined more than once: {sorted(set(dup))}")
    clash = set(prognostics) & set(formula_names)
    if clash:
        raise CycleError(f"field both prognostic and defined by a formula: {sorted(clash)}")
    for ev in evals:
        for d in ev.dependencies:
            if d not in known and d not in by_target:
                raise UnknownFieldError(f"{d!r} (read by {ev.target}) has no formula and is not "
                                        "prognostic")
    for d in root_reads:
        if d not in known and d not in by_target:
            raise UnknownFieldError(f"{d!r} has no formula and is not prognostic")

    # dependency levels, with cycle detection
    state: dict[str, int] = {}

    def level(name: str, path: list[str]) -> int:
        ev = by_target.get(name)
        if ev is None:
            return -1
        if state.get(name) == 1:
            cycle = path[path.index(name):] + [name]
            raise CycleError("circular dependency: " + " -> ".join(cycle))
        if state.get(name) == 2:
            return ev.level
        state[name] = 1
        ev.level = 1 + max((level(d, path + [name]) for d in ev.dependencies), default=-1)
        state[name] = 2
        return ev.level

    for ev in evals:
        level(ev.target, [])
    order = {id(ev): i for i, ev in enumerate(evals)}
    evals.sort(key=lambda ev: (ev.level, order[id(ev)]))

    # static: no transitive dependence on prognostics or time
    for ev in evals:
        ev.static = (not _uses_time(ev.expression)
                     and all(d not in prognostics and d not in extra_fields
                             and (d in by_target and by_target[d].static)
                             for d in ev.dependencies))

    if prune:
        live = set(root_reads)
        for ev in reversed(evals):
            if ev.target in live:
                live |= ev.dependencies
        evals = [ev for ev in evals if ev.target in live]

    # widen ranges backwards from the interior-only consumers
    if grid is not None:
        ndim = grid.ndim
    elif ndim is None:
        raise ValueError("either a grid or ndim is required")
    zero = (0,) * ndim
    need: dict[str, tuple[int, ...]] = {name: zero for name in root_reads}

    def widen(name, w):
        old = need.get(name, zero)
        need[name] = tuple(max(a, b) for a, b in zip(old, w))

    for ev in reversed(evals):
        w = need.get(ev.target, zero)
        need[ev.target] = w
        ev.widen = w
        if ev.kind == "derivative":
            axis = ev.expression.direction
            reach = tuple(wi + (m if i == axis else 0) for i, wi in enumerate(w))
        else:
            reach = w
        for d in ev.dependencies:
            widen(d, reach)
    required = tuple(max((need[n][a] for n in need), default=0) for a in range(ndim))

    if grid is not None:
        for a in range(ndim):
            if grid.halo[a] < required[a]:
                raise FootprintViolation(
                    f"halo {grid.halo} too small, direction {a} needs {required[a]} points")
        for ev in evals:
            ev.range = ev.range_for(grid)
    return EvaluationSet(evals, temporaries, need, required, prognostics)

