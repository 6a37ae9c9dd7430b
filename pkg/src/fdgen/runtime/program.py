"""The executable program: grid, constants, arrays, kernel schedules and boundary actions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..discretize import ConstantPool, Kernel, TemporalScheme
from ..discretize import ir
from ..errors import ScheduleError, UnknownFieldError
from ..grid import Grid
from .boundary import BoundaryAction


@dataclass
class DiagnosticPlan:
    """Kernels filling integrand arrays, reduced after each diagnostic evaluation."""

    kernels: list[Kernel]
    integrands: dict[str, str]  # label -> array name
    rho_ref: float = 1.0


@dataclass
class Program:
    grid: Grid
    pool: ConstantPool
    arrays: list[str]
    prognostics: tuple[str, ...]
    init_kernels: list[Kernel]
    spatial_kernels: list[Kernel]
    residual_kernels: list[Kernel]
    temporal_kernels: list[Kernel]
    scheme: TemporalScheme
    bc_actions: list[BoundaryAction]
    dt: float
    niter: int
    static_arrays: tuple[str, ...] = ()
    components: dict = field(default_factory=dict)  # array name -> component tuple
    diagnostics: DiagnosticPlan | None = None
    check_every: int = 100
    spatial_accuracy: int = 2
    name: str = "program"
    equations: list = field(default_factory=list)

    @property
    def stage_kernels(self) -> list[Kernel]:
        return self.spatial_kernels + self.residual_kernels + self.temporal_kernels

    @property
    def all_kernels(self) -> list[Kernel]:
        diag = self.diagnostics.kernels if self.diagnostics else []
        return self.init_kernels + self.stage_kernels + diag

    @property
    def constants(self) -> dict[str, float]:
        return dict(self.pool.values)

    def slot(self, name: str) -> int:
        return self.arrays.index(name)

    def stage_time(self, iteration: int, stage: int) -> float:
        return iteration * self.dt + float(self.scheme.C[stage]) * self.dt


def _box(kernel: Kernel, name: str):
    fp = kernel.footprint[name]
    return (tuple(lo + f[0] for lo, f in zip(kernel.range.lower, fp)),
            tuple(hi + f[1] for hi, f in zip(kernel.range.upper, fp)))


def _inside(inner, outer) -> bool:
    return all(a >= b for a, b in zip(inner[0], outer[0])) and \
        all(a <= b for a, b in zip(inner[1], outer[1]))


def _replay(kernels: Sequence[Kernel], valid: dict, label: str) -> None:
    for k in kernels:
        for name in sorted(k.inputs):
            box = valid.get(name)
            need = _box(k, name)
            if box is None or not _inside(need, box):
                raise ScheduleError(
                    f"{label}: kernel {k.name} reads {name} over {need[0]}..{need[1]} but only "
                    f"{'nothing' if box is None else f'{box[0]}..{box[1]}'} is valid")
        for name in k.outputs:
            valid[name] = (k.range.lower, tuple(k.range.upper))


def validate(program: Program) -> None:
    """Check footprints, constants and that each stage reads only valid points."""
    grid = program.grid
    names = set(program.arrays)
    for k in program.all_kernels:
        k.check_footprint(grid)
        for st in k.statements:
            if isinstance(st.target, ir.Store) and st.target.array not in names:
                raise UnknownFieldError(f"kernel {k.name} writes unknown array {st.target.array}")
            for n in ir.walk(st.value):
                if isinstance(n, ir.Const) and n.name not in program.pool:
                    raise UnknownFieldError(f"kernel {k.name} uses undefined constant {n.name}")
                if isinstance(n, ir.Load) and n.array not in names:
                    raise UnknownFieldError(f"kernel {k.name} reads unknown array {n.array}")
                if isinstance(n, ir.Coord) and f"delta{n.axis}" not in program.pool:
                    raise UnknownFieldError(f"grid spacing delta{n.axis} is undefined")
    full = (tuple(-h for h in grid.halo), tuple(n + h for n, h in zip(grid.shape, grid.halo)))
    valid: dict = {}
    _replay(program.init_kernels, valid, "initialisation")
    for name in program.prognostics:
        if name not in valid:
            raise ScheduleError(f"prognostic {name} has no initial condition")
    statics = {n: valid[n] for n in program.static_arrays if n in valid}
    bc_dirs = {a.direction for a in program.bc_actions}
    if bc_dirs != set(range(grid.ndim)):
        missing = sorted(set(range(grid.ndim)) - bc_dirs)
        raise ScheduleError(f"no boundary condition for direction(s) {missing}")
    for stage in range(program.scheme.stages):
        valid = dict(statics)
        valid.update({n: full for n in program.prognostics})
        for n in program.arrays:
            if n.startswith("acc_"):
                valid[n] = (tuple(0 for _ in grid.shape), tuple(grid.shape))
        _replay(program.stage_kernels, valid, f"stage {stage}")
    if program.diagnostics:
        valid = dict(statics)
        valid.update({n: full for n in program.prognostics})
        _replay(program.diagnostics.kernels, valid, "diagnostics")
    if program.dt <= 0 or program.niter < 0:
        raise ScheduleError("time step must be positive and the step count non-negative")
