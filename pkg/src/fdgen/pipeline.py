"""Setup → Program: parse, substitute, expand, discretise, schedule."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .diagnostics import build_diagnostic_evaluations, build_diagnostic_plan
from .discretize import (ConstantPool, build_assignment_kernel, build_evaluations,
                         build_residual_kernels, build_temporal_kernels, fuse_kernels, get_scheme,
                         pool_temporaries)
from .einstein import ExpandedEquation, ExpansionContext, expand
from .errors import ConfigError, FDError
from .expr import evaluate, parse_equation, parse_expression, substitute
from .grid import Grid, create_grid
from .io import ProblemSpec, _assignment
from .runtime import BoundaryAction, Program, validate

RESERVED = re.compile(r"(wk|dk|tmp|dtmp)\d+$")


@dataclass
class Frontend:
    """The symbolic half of compilation, independent of grid resolution."""

    expanded: list[ExpandedEquation]
    formulas: list[ExpandedEquation]
    initial: list[ExpandedEquation]
    constant_names: set


def frontend(spec: ProblemSpec) -> Frontend:
    ctx = ExpansionContext(spec.ndim)
    names = spec.constant_names

    def parse(text, path):
        try:
            return parse_equation(text, names)
        except FDError as exc:
            raise ConfigError(path, str(exc)) from None

    subs = [parse(s, f"problem.substitutions[{i}]") for i, s in enumerate(spec.substitutions)]
    expanded, formulas, initial = [], [], []
    for i, s in enumerate(spec.equations):
        eq = substitute(parse(s, f"problem.equations[{i}]"), subs)
        expanded += expand(eq, ctx)
    for i, s in enumerate(spec.formulas):
        eq = substitute(parse(_assignment(s), f"problem.formulas[{i}]"), subs)
        formulas += expand(eq, ctx)
    for i, s in enumerate(spec.initial):
        initial += expand(parse(_assignment(s), f"initial[{i}]"), ctx)
    for eq in expanded + formulas:
        if RESERVED.match(eq.name):
            raise ConfigError("problem", f"field name {eq.name!r} is reserved for temporaries")
    return Frontend(expanded, formulas, initial, names)


def _prefixed(kernels, prefix):
    for k in kernels:
        k.name = prefix + k.name
    return kernels


def compile_spec(spec: ProblemSpec, *, threads_hint: int = 1, diagnostics: bool = True,
                 fuse: bool = True) -> Program:
    """Build a validated Program from a setup."""
    fe = frontend(spec)
    ndim, order = spec.ndim, spec.spatial_order
    prognostics = tuple(eq.name for eq in fe.expanded)
    want_diag = diagnostics and spec.io.velocity is not None

    probe = build_evaluations(fe.expanded, fe.formulas, None, order, ndim=ndim)
    statics = [ev.target for ev in probe if ev.static]
    dynamic_formulas = [f for f in fe.formulas if f.name not in statics]
    halo = list(probe.required_halo)
    if want_diag:
        dprobe = build_diagnostic_evaluations(
            ndim, fe.constant_names, dynamic_formulas, list(prognostics) + statics, None, order,
            spec.io.density, spec.io.velocity)
        halo = [max(a, b) for a, b in zip(halo, dprobe.required_halo)]
    grid = create_grid(ndim, spec.shape, spec.deltas, halo)

    pool = ConstantPool(spec.constant_values())
    evset = build_evaluations(fe.expanded, fe.formulas, grid, order)
    lower = (lambda evs, prefix: fuse_kernels(evs, pool, grid, order, prefix=prefix)) if fuse \
        else (lambda evs, prefix: [fuse_kernels([e], pool, grid, order)[0] for e in evs])
    static_kernels = lower([ev for ev in evset if ev.static], "init")
    spatial = lower([ev for ev in evset if not ev.static], "fused")
    residual = build_residual_kernels(fe.expanded, evset, pool, grid)
    scheme = get_scheme(spec.temporal)
    temporal = build_temporal_kernels(scheme, prognostics, grid)
    if fuse:
        residual = fuse_kernels(residual, prefix="residual")
        temporal = fuse_kernels(temporal, prefix="update")
    static_names = {ev.target for ev in evset if ev.static}
    stage, _ = pool_temporaries(spatial + residual + temporal, exclude=static_names)
    spatial = stage[:len(spatial)]
    residual = stage[len(spatial):len(spatial) + len(residual)]
    temporal = stage[len(spatial) + len(residual):]

    ic = build_assignment_kernel("k_initial", [(eq.name, eq.rhs) for eq in fe.initial],
                                 prognostics, pool, grid)
    init = [ic] + _prefixed(static_kernels, "i_")

    plan, diag_arrays = None, []
    if want_diag:
        devs = build_diagnostic_evaluations(
            ndim, fe.constant_names, dynamic_formulas, list(prognostics) + sorted(static_names),
            grid, order, spec.io.density, spec.io.velocity)
        plan, diag_arrays = build_diagnostic_plan(devs, pool, grid, order)

    arrays: list[str] = list(prognostics)
    if scheme.kind != "ForwardEuler":
        arrays += [f"acc_{p}" for p in prognostics]
    for k in init + stage + (plan.kernels if plan else []):
        for n in sorted(k.outputs):
            if n not in arrays:
                arrays.append(n)

    components = {eq.name: eq.target.components for eq in fe.expanded + fe.formulas}
    actions = []
    for b in spec.boundaries:
        if b.kind == "periodic":
            actions.append(BoundaryAction("periodic", b.direction))
        else:
            parities = tuple((p, -1) for p in prognostics
                             if components.get(p) == (b.direction,))
            actions.append(BoundaryAction("symmetry", b.direction, b.side, parities))

    program = Program(
        grid=grid, pool=pool, arrays=arrays, prognostics=prognostics, init_kernels=init,
        spatial_kernels=spatial, residual_kernels=residual, temporal_kernels=temporal,
        scheme=scheme, bc_actions=actions, dt=spec.dt, niter=spec.niter,
        static_arrays=tuple(sorted(static_names)), components=components, diagnostics=plan,
        check_every=spec.io.check_every, spatial_accuracy=order, name=spec.name,
        equations=fe.expanded + fe.formulas)
    validate(program)
    return program


def coordinate_arrays(grid: Grid) -> dict[str, np.ndarray]:
    idx = np.meshgrid(*[np.arange(n) for n in grid.shape], indexing="ij")
    out = {}
    for a, i in enumerate(idx):
        out[f"x{a}"] = i * grid.deltas[a]
        out[f"idx{a}"] = i.astype(np.float64)
    return out


def exact_solution(spec: ProblemSpec, name: str, grid: Grid, t: float) -> np.ndarray:
    """Evaluate the setup's reference solution for ``name`` on the interior at time ``t``."""
    e = parse_expression(spec.io.exact[name], spec.constant_names)
    env = {**spec.constant_values(), **coordinate_arrays(grid), "t": t}
    return np.broadcast_to(evaluate(e, env), grid.shape)
