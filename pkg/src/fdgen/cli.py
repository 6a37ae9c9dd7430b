"""Command-line entry point: ``fdgen run | converge | emit | cases``."""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .codegen import emit
from .discretize import central_coefficients, get_scheme
from .errors import ConfigError, FDError, NumericalBlowup, SnapshotIOError
from .expr import render_latex
from .io import (ProblemSpec, append_diagnostics, ensure_writable, read_setup,
                 write_snapshot)
from .pipeline import compile_spec, exact_solution, frontend
from .runtime import Runtime

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3
MACHINE_FLOOR = 1e-13

# negative-real-axis stability limits of the explicit schemes
REAL_AXIS_LIMIT = {"ForwardEuler": 2.0, "RK3LowStorage": 2.5127453266183286}


# ---------------------------------------------------------------------------
# bundled cases

def case_names() -> list[str]:
    root = resources.files("fdgen") / "cases"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def case_path(name: str) -> Path:
    path = resources.files("fdgen") / "cases" / f"{name}.yaml"
    return Path(str(path))


def resolve_setup(arg: str) -> ProblemSpec:
    """A setup file path, or the name of a bundled case."""
    path = Path(arg)
    if not path.exists() and arg in case_names():
        path = case_path(arg)
    if not path.exists():
        raise ConfigError("setup", f"no such file or bundled case: {arg}")
    return read_setup(path)


def _describe(name: str) -> str:
    first = case_path(name).read_text().splitlines()[0]
    return first.lstrip("# ").strip()


# ---------------------------------------------------------------------------
# running

def max_errors(spec: ProblemSpec, runtime: Runtime) -> dict[str, float]:
    out = {}
    for name in spec.io.exact:
        if name in runtime.state:
            ref = exact_solution(spec, name, runtime.grid, runtime.time)
            out[name] = float(np.max(np.abs(runtime.state.interior(name) - ref)))
    return out


def l2_error(spec: ProblemSpec, runtime: Runtime, name: str) -> float:
    ref = exact_solution(spec, name, runtime.grid, runtime.time)
    diff = runtime.state.interior(name) - ref
    return float(np.sqrt(np.mean(diff * diff)))


def snapshot(runtime: Runtime, directory: Path) -> Path:
    names = runtime.program.prognostics
    data = {n: runtime.state.interior(n) for n in names}
    return write_snapshot(data, runtime.grid, runtime.time, runtime.iteration,
                          directory / f"snap_{runtime.iteration:08d}")


def run_setup(spec: ProblemSpec, *, threads: int = 1, out: Path | None = None,
              snapshot_every: int | None = None, check_every: int | None = None,
              niter: int | None = None, log=print) -> Runtime:
    """Compile and run a setup, writing snapshots and the diagnostics log under ``out``."""
    program = compile_spec(spec)
    every = []
    snap_n = spec.io.snapshot_every if snapshot_every is None else snapshot_every
    if out is not None:
        out = ensure_writable(out)
        if snap_n:
            every.append((snap_n, lambda r: snapshot(r, out)))
        if program.diagnostics is not None and spec.io.diagnostics_every:
            log_path = out / "diagnostics.csv"
            if log_path.exists():
                log_path.unlink()
            every.append((spec.io.diagnostics_every,
                          lambda r: append_diagnostics({"t": r.time, **r.diagnostics()}, log_path)))
    rt = Runtime(program, threads)
    t0 = time.perf_counter()
    try:
        rt.run(niter=niter, every=every, check_every=check_every)
    finally:
        rt.close()
    wall = time.perf_counter() - t0
    if out is not None:
        snapshot(rt, out)
    rate = rt.iteration / wall if wall > 0 else float("inf")
    log(f"{spec.name}: {rt.iteration} steps to t={rt.time:.6g} in {wall:.3f} s "
        f"({rate:.1f} steps/s, {threads} thread(s))")
    for name, err in max_errors(spec, rt).items():
        log(f"  max |{name} - exact| = {err:.3e}")
    return rt


# ---------------------------------------------------------------------------
# convergence studies

@dataclass
class Level:
    n: int
    dx: float
    dt: float
    niter: int
    error: float


def convergence_slope(dx: Sequence[float], errors: Sequence[float],
                      floor: float = MACHINE_FLOOR) -> float:
    """Least-squares slope of log(error) against log(dx), ignoring levels below ``floor``."""
    pts = [(math.log(h), math.log(e)) for h, e in zip(dx, errors) if e >= floor]
    if len(pts) < 2:
        return float("nan")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def second_derivative_radius(order: int) -> float:
    """max over wavenumbers of |symbol| of the degree-2 stencil, in units of 1/dx^2."""
    st = central_coefficients(2, order)
    theta = np.linspace(0.0, math.pi, 2049)
    symbol = sum(float(w) * np.cos(k * theta) for k, w in zip(st.offsets, st.weights))
    return float(np.max(np.abs(symbol)))


def courant_dt(spec: ProblemSpec, dx: float, courant: float, t_end: float,
               diffusivity: float = 0.0, safety: float = 0.9) -> tuple[float, int]:
    """Largest dt = t_end/n with max|u| dt/dx <= courant (unit speed when no ``u``).

    With a positive ``diffusivity`` dt also stays inside the scheme's real-axis
    stability limit for the second-derivative stencil summed over all directions.
    """
    u = spec.constants.get("u", [1.0])
    speed = max(abs(float(v)) for v in (u if isinstance(u, (list, tuple)) else [u])) or 1.0
    dt = courant * dx / speed
    if diffusivity > 0:
        limit = REAL_AXIS_LIMIT[get_scheme(spec.temporal).kind]
        radius = spec.ndim * diffusivity * second_derivative_radius(spec.spatial_order) / dx ** 2
        dt = min(dt, safety * limit / radius)
    n = math.ceil(t_end / dt - 1e-12)
    return t_end / n, n


def converge(spec: ProblemSpec, order: int, levels: Sequence[int], *, t_end: float = 100.0,
             courant: float = 0.025, field: str = "phi", steady_tol: float | None = None,
             diffusivity: float = 0.0, threads: int = 1, log=None) -> list[Level]:
    """Run ``spec`` at each resolution with the given order; L2 error against its exact field."""
    out = []
    lengths = [n * d for n, d in zip(spec.shape, spec.deltas)]
    for n in levels:
        s = spec.with_grid((n,) * spec.ndim)
        s.spatial_order = order
        dx = lengths[0] / n
        s.dt, s.niter = courant_dt(s, dx, courant, t_end, diffusivity)
        rt = Runtime(compile_spec(s, diagnostics=False), threads)
        stop = None
        if steady_tol:
            prev = {}

            def stop(r, prev=prev):
                cur = r.state.interior(field)
                done = "x" in prev and math.sqrt(np.mean((cur - prev["x"]) ** 2)) < steady_tol
                prev["x"] = cur.copy()
                return done
        try:
            rt.run(stop=stop)
        finally:
            rt.close()
        lvl = Level(n, dx, s.dt, rt.iteration, l2_error(s, rt, field))
        out.append(lvl)
        if log:
            log(f"  order {order:2d}  N={n:4d}  dx={dx:.5f}  steps={lvl.niter:7d}  "
                f"L2={lvl.error:.3e}")
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_run(args) -> int:
    spec = resolve_setup(args.setup)
    run_setup(spec, threads=args.threads, out=Path(args.out) if args.out else None,
              snapshot_every=args.snapshot_every, check_every=args.check_every,
              niter=args.niter)
    return EXIT_OK


def _diffusivity(spec: ProblemSpec, arg: str | None) -> float:
    """A number, the name of a scalar constant, or by default the constant ``k`` if present."""
    if arg is None:
        value = spec.constants.get("k", 0.0)
        return 0.0 if isinstance(value, list) else float(value)
    try:
        return float(arg)
    except ValueError:
        value = spec.constants.get(arg)
        if value is None or isinstance(value, list):
            raise ConfigError("--diffusivity", f"no scalar constant named {arg!r}") from None
        return float(value)


def cmd_converge(args) -> int:
    spec = resolve_setup(args.case)
    if not spec.io.exact:
        raise ConfigError("io.exact", f"case {spec.name} has no exact solution")
    field = args.field or next(iter(spec.io.exact))
    diffusivity = _diffusivity(spec, args.diffusivity)
    print(f"{spec.name}: L2 error of {field} at t={args.t_end:g}, Courant {args.courant:g}")
    for order in args.orders:
        levels = converge(spec, order, args.levels, t_end=args.t_end, courant=args.courant,
                          field=field, steady_tol=args.steady_tol, diffusivity=diffusivity,
                          threads=args.threads, log=print)
        slope = convergence_slope([l.dx for l in levels], [l.error for l in levels])
        floored = [l.n for l in levels if l.error < MACHINE_FLOOR]
        note = f" (levels {floored} at machine-precision floor, excluded)" if floored else ""
        print(f"order {order}: slope {slope:.3f}{note}")
    return EXIT_OK


def cmd_emit(args) -> int:
    spec = resolve_setup(args.setup)
    out = ensure_writable(Path(args.out))
    if args.target == "latex":
        fe = frontend(spec)
        path = out / f"{spec.name}.tex"
        path.write_text(render_latex(fe.expanded + fe.formulas))
        print(f"wrote {path}")
    else:
        src = emit(compile_spec(spec, diagnostics=False), parallel=args.parallel)
        for p in src.write(out):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_cases(args) -> int:
    for name in case_names():
        print(f"{name:8s} {_describe(name)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdgen", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="compile and run a setup file or bundled case")
    p.add_argument("setup")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="directory for snapshots and diagnostics.csv")
    p.add_argument("--snapshot-every", type=int, default=None)
    p.add_argument("--check-every", type=int, default=None)
    p.add_argument("--niter", type=int, default=None, help="override the number of steps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="grid-convergence study against the exact solution")
    p.add_argument("case", nargs="?", default="mms2d")
    p.add_argument("--orders", type=int, nargs="+", default=[2, 4, 6, 8])
    p.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--courant", type=float, default=0.025)
    p.add_argument("--field", default=None)
    p.add_argument("--steady-tol", type=float, default=None,
                   help="stop a level early once the per-step L2 change drops below this")
    p.add_argument("--diffusivity", default=None,
                   help="value or constant name that also bounds dt by diffusive stability "
                        "(default: the constant k when defined)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("emit", help="write C source or a LaTeX rendering")
    p.add_argument("setup")
    p.add_argument("--target", choices=["c", "latex"], required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--parallel", action="store_true", help="add guarded OpenMP annotations")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("cases", help="list the bundled validation cases")
    p.set_defaults(func=cmd_cases)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalBlowup as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (SnapshotIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
