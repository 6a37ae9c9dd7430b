"""Program execution: array store, tiled parallel kernel launches, the time loop."""
from __future__ import annotations

import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..discretize import ConstantPool, Kernel
from ..errors import DuplicateNameError, NumericalBlowup
from ..grid import Grid, WorkArray
from .backend import compile_kernels
from .boundary import apply_boundaries
from .program import Program, validate


class State:
    """All work arrays of a program as rows of one 2-D store ``[slot, flat index]``."""

    def __init__(self, grid: Grid, names: Sequence[str], init: float = 0.0):
        if len(set(names)) != len(names):
            raise DuplicateNameError("array names must be unique")
        self.grid = grid
        self.names = list(names)
        self.store = np.full((max(len(names), 1), grid.padded_size), init, dtype=np.float64)
        self.slots = {n: i for i, n in enumerate(names)}

    def __contains__(self, name: str) -> bool:
        return name in self.slots

    def array(self, name: str) -> WorkArray:
        return WorkArray(name, self.store[self.slots[name]], self.grid)

    def view(self, name: str) -> np.ndarray:
        return self.store[self.slots[name]].reshape(self.grid.padded_shape)

    def interior(self, name: str) -> np.ndarray:
        return self.view(name)[self.grid.interior]

    def interior_copy(self) -> dict[str, np.ndarray]:
        return {n: self.interior(n).copy() for n in self.names}


class Launcher:
    """Runs compiled kernels, tiling the slowest axis across a fixed thread pool.

    Each point is computed independently, so the result does not depend on
    the number of tiles.
    """

    def __init__(self, grid: Grid, threads: int = 1):
        self.grid = grid
        self.threads = max(1, int(threads))
        self.s = np.array(grid.strides, dtype=np.int64)
        self.h = np.array(grid.halo, dtype=np.int64)
        self.pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        self._tiles: dict = {}

    def tiles(self, kernel: Kernel):
        key = (kernel.name, kernel.range)
        if key not in self._tiles:
            lo = np.array(kernel.range.lower, dtype=np.int64) + self.h
            hi = np.array(kernel.range.upper, dtype=np.int64) + self.h
            n = int(hi[0] - lo[0])
            parts = min(self.threads, n)
            bounds = [lo[0] + (n * p) // parts for p in range(parts + 1)]
            out = []
            for a, b in zip(bounds[:-1], bounds[1:]):
                tlo, thi = lo.copy(), hi.copy()
                tlo[0], thi[0] = a, b
                out.append((tlo, thi))
            self._tiles[key] = out
        return self._tiles[key]

    def launch(self, fn, kernel: Kernel, store: np.ndarray, c: np.ndarray) -> None:
        tiles = self.tiles(kernel)
        if self.pool is None or len(tiles) == 1:
            for lo, hi in tiles:
                fn(store, c, lo, hi, self.s, self.h)
            return
        futures = [self.pool.submit(fn, store, c, lo, hi, self.s, self.h) for lo, hi in tiles]
        for f in futures:
            f.result()

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None


def pairwise_sum(values: np.ndarray) -> float:
    """Sum by a fixed pairwise tree over the flattened data (independent of workers)."""
    a = np.array(values, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])


@dataclass
class RunResult:
    state: State
    iteration: int
    time: float
    diagnostics: list = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def fields(self) -> dict[str, np.ndarray]:
        return self.state.interior_copy()


class Runtime:
    """An instantiated program: compiled kernels, array store and clock."""

    def __init__(self, program: Program, threads: int = 1, check: bool = True):
        if check:
            validate(program)
        self.program = program
        self.grid = program.grid
        self.state = State(program.grid, program.arrays)
        self.launcher = Launcher(program.grid, threads)
        pool = program.pool
        self.c = np.array([pool.values[n] for n in pool.names], dtype=np.float64)
        self.ci = {n: i for i, n in enumerate(pool.names)}
        self.functions = compile_kernels(program.all_kernels, self.state.slots.__getitem__,
                                         self.ci.__getitem__, program.grid.ndim)
        self.iteration = 0
        self.time = 0.0
        self._initialised = False

    # primitives
    def run_kernel(self, kernel: Kernel) -> None:
        self.launcher.launch(self.functions[kernel.name], kernel, self.state.store, self.c)

    def set_constant(self, name: str, value: float) -> None:
        self.c[self.ci[name]] = value

    def apply_boundaries(self, names: Sequence[str] | None = None) -> None:
        names = self.program.prognostics if names is None else names
        views = {n: self.state.view(n) for n in names}
        apply_boundaries(self.program.bc_actions, views, self.grid)

    # phases
    def initialise(self) -> None:
        self.set_constant("t", 0.0)
        for k in self.program.init_kernels:
            self.run_kernel(k)
        self.iteration, self.time = 0, 0.0
        self._initialised = True

    def step(self) -> None:
        prog = self.program
        it = self.iteration
        for s in range(prog.scheme.stages):
            self.set_constant("t", prog.stage_time(it, s))
            for name, v in prog.scheme.stage_constants(s).items():
                self.set_constant(name, v)
            self.apply_boundaries()
            for k in prog.stage_kernels:
                self.run_kernel(k)
        self.iteration = it + 1
        self.time = self.iteration * prog.dt

    def check_finite(self) -> None:
        for name in self.program.prognostics:
            if not np.isfinite(self.state.interior(name)).all():
                raise NumericalBlowup(self.iteration, name)

    def diagnostics(self) -> dict[str, float]:
        """Normalised volume integrals of the configured integrands at the current state."""
        plan = self.program.diagnostics
        if plan is None:
            return {}
        self.apply_boundaries()
        self.set_constant("t", self.time)
        for k in plan.kernels:
            self.run_kernel(k)
        g = self.grid
        cell = float(np.prod(g.deltas))
        volume = float(np.prod(g.lengths))
        return {label: pairwise_sum(self.state.interior(arr)) * cell / (plan.rho_ref * volume)
                for label, arr in plan.integrands.items()}

    def run(self, niter: int | None = None,
            every: Sequence[tuple[int, Callable[["Runtime"], None]]] = (),
            check_every: int | None = None,
            stop: Callable[["Runtime"], bool] | None = None) -> "Runtime":
        """Advance ``niter`` steps (default: the program's), calling each ``(n, fn)`` hook at
        iteration 0, every n steps and at the end."""
        if not self._initialised:
            self.initialise()
        niter = self.program.niter if niter is None else niter
        check_every = self.program.check_every if check_every is None else check_every
        end = self.iteration + niter
        fired: set = set()

        def hooks(final=False):
            for i, (n, fn) in enumerate(every):
                if n and (self.iteration % n == 0 or final) and (i, self.iteration) not in fired:
                    fired.add((i, self.iteration))
                    fn(self)

        hooks()
        while self.iteration < end:
            self.step()
            if check_every and self.iteration % check_every == 0:
                self.check_finite()
            hooks()
            if stop is not None and stop(self):
                break
        self.check_finite()
        hooks(final=True)
        return self

    def close(self) -> None:
        self.launcher.close()


def run(program: Program, threads: int = 1, diagnostics_every: int = 0,
        every: Sequence = ()) -> RunResult:
    """Initialise and run a program to completion, collecting diagnostic rows."""
    rt = Runtime(program, threads)
    rows = []

    def diag(r: Runtime):
        rows.append({"t": r.time, **r.diagnostics()})

    hooks = list(every)
    if diagnostics_every and program.diagnostics:
        hooks.append((diagnostics_every, diag))
    t0 = _time.perf_counter()
    try:
        rt.run(every=hooks)
    finally:
        rt.close()
    return RunResult(rt.state, rt.iteration, rt.time, rows, _time.perf_counter() - t0)


def execute_kernel(kernel: Kernel, state: State, constants: ConstantPool | Mapping[str, float],
                   threads: int = 1, debug: bool = False) -> State:
    """Run a single kernel on ``state`` in place (and return it)."""
    values = constants.values if isinstance(constants, ConstantPool) else dict(constants)
    names = list(values)
    if debug:
        kernel.check_footprint(state.grid)
    c = np.array([values[n] for n in names], dtype=np.float64)
    fns = compile_kernels([kernel], state.slots.__getitem__, names.index, state.grid.ndim)
    launcher = Launcher(state.grid, threads)
    try:
        launcher.launch(fns[kernel.name], kernel, state.store, c)
    finally:
        launcher.close()
    return state
