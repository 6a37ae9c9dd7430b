"""Standalone C99 translation of a Program.

The output is a header holding one function per kernel plus a driver with
the constants, array allocation, boundary filling and the time/stage loop.
Expressions are printed in the IR's association order and constants as
round-tripping literals, so a serial build compiled with
``-ffp-contract=off`` reproduces the in-process runtime bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .discretize import Kernel, ir
from .errors import UnsupportedConstruct
from .runtime import Program
from .runtime.backend import kernel_body, used

C_FUNCTIONS = {"sin", "cos", "exp", "tanh", "sqrt", "log"}
COMPILE_FLAGS = ("-O2", "-std=c99", "-ffp-contract=off")


@dataclass
class EmittedSource:
    kernels_header: str
    driver_source: str

    def write(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header, driver = directory / "kernels.h", directory / "driver.c"
        header.write_text(self.kernels_header)
        driver.write_text(self.driver_source)
        return header, driver


class CKernelPrinter(ir.CPrinter):
    step = "  "
    end = ";"

    def loop(self, a: int) -> str:
        return f"for (long i{a} = lo[{a}]; i{a} < hi[{a}]; ++i{a}) {{"

    def close_loop(self) -> str:
        return "}"

    def declare_index(self) -> str:
        return "const long "

    def declare_local(self) -> str:
        return "const double "

    def flat_index(self, ndim: int) -> str:
        return f"IDX({', '.join(f'i{a}' for a in range(ndim))})"

    def call(self, fn: str, a: str) -> str:
        if fn not in C_FUNCTIONS:
            raise UnsupportedConstruct(f"no C lowering for function {fn!r}")
        return super().call(fn, a)

    def expr(self, n: ir.Node) -> str:
        if isinstance(n, ir.Num) and not math.isfinite(n.value):
            raise UnsupportedConstruct(f"non-finite literal {n.value!r}")
        try:
            return super().expr(n)
        except TypeError as exc:
            raise UnsupportedConstruct(str(exc)) from None


def c_literal(value: float) -> str:
    """Shortest round-tripping decimal literal for a double."""
    if not math.isfinite(value):
        raise UnsupportedConstruct(f"non-finite constant {value!r}")
    text = repr(float(value))
    return text if ("." in text or "e" in text) else text + ".0"


def c_name(name: str) -> str:
    return f"c_{name}"


def _kernel_function(kernel: Kernel, printer: CKernelPrinter, program: Program,
                     parallel: bool) -> list[str]:
    g = program.grid
    lo = ", ".join(str(a + h) for a, h in zip(kernel.range.lower, g.halo))
    hi = ", ".join(str(b + h) for b, h in zip(kernel.range.upper, g.halo))
    lines = [f"static void {kernel.name}(double *const *st)", "{",
             f"  static const long lo[{g.ndim}] = {{{lo}}};",
             f"  static const long hi[{g.ndim}] = {{{hi}}};"]
    for a in used(kernel)[1]:
        lines.append(f"  const long h{a} = {g.halo[a]};")
    if parallel:
        lines += ["#ifdef _OPENMP", "#pragma omp parallel for", "#endif"]
    body = kernel_body(kernel, printer, "  ", g.ndim)
    if not kernel.statements:
        body = []
    lines += body
    lines.append("}")
    return lines


def _header(program: Program, parallel: bool) -> str:
    g = program.grid
    slots = {n: i for i, n in enumerate(program.arrays)}
    consts = program.pool.names
    printer = CKernelPrinter(slots.__getitem__, consts.index, g.ndim)
    idx_args = ", ".join(f"i{a}" for a in range(g.ndim))
    idx_body = " + ".join([f"(long)(i{a}) * {g.strides[a]}L" for a in range(g.ndim - 1)]
                          + [f"(long)(i{g.ndim - 1})"])
    lines = [f"/* kernels for {program.name}; generated by fdgen, do not edit */",
             "#ifndef FDGEN_KERNELS_H", "#define FDGEN_KERNELS_H", "", "#include <math.h>", "",
             f"#define NDIM {g.ndim}",
             f"#define NARRAYS {len(program.arrays)}",
             f"#define PADDED_SIZE {g.padded_size}L",
             f"#define IDX({idx_args}) ({idx_body})", ""]
    lines += [f"static const long s{a} = {g.strides[a]}L;" for a in range(g.ndim - 1)]
    lines.append("")
    for name in consts:
        lines.append(f"extern double {c_name(name)};")
    lines.append("")
    for i, name in enumerate(program.arrays):
        lines.append(f"/* st[{i}]: {name} */")
    for k in program.init_kernels + program.stage_kernels:
        lines.append("")
        lines += _kernel_function(k, printer, program, parallel)
    lines += ["", "#endif", ""]
    return "\n".join(lines)


def _boundary_functions(program: Program) -> list[str]:
    g = program.grid
    padded = g.padded_shape
    out = []
    for d in range(g.ndim):
        outer = 1
        for a in range(d):
            outer *= padded[a]
        inner = g.strides[d]
        out += [
            f"static void fill_dir{d}(double *a, int mode, double sign)",
            "{",
            f"  const long n = {g.shape[d]}, h = {g.halo[d]}, outer = {outer}, "
            f"inner = {inner}, len = {padded[d]};",
            "  for (long o = 0; o < outer; ++o) {",
            "    for (long k = 0; k < h; ++k) {",
            "      long dst, src;",
            "      for (int part = 0; part < 2; ++part) {",
            "        if (mode == 0) {",
            "          dst = part == 0 ? k : n + h + k;",
            "          src = ((dst - h) % n + n) % n + h;",
            "        } else if (mode == 1) {",
            "          if (part) break;",
            "          dst = h - 1 - k; src = h + k;",
            "        } else {",
            "          if (part) break;",
            "          dst = n + h + k; src = n + h - 1 - k;",
            "        }",
            "        double *pd = a + (o * len + dst) * inner;",
            "        const double *ps = a + (o * len + src) * inner;",
            "        for (long i = 0; i < inner; ++i)",
            "          pd[i] = sign < 0 ? -ps[i] : ps[i];",
            "      }",
            "    }",
            "  }",
            "}",
            ""]
    return out


def _boundary_calls(program: Program, indent: str) -> list[str]:
    slots = {n: i for i, n in enumerate(program.arrays)}
    lines = []
    for act in program.bc_actions:
        mode = 0 if act.kind == "periodic" else (1 if act.side == "left" else 2)
        for name in program.prognostics:
            sign = "-1.0" if act.parity(name) < 0 else "1.0"
            lines.append(f"{indent}fill_dir{act.direction}(st[{slots[name]}], {mode}, {sign});"
                         f" /* {act.kind} {name} */")
    return lines


def _driver(program: Program) -> str:
    g = program.grid
    consts = program.pool
    scheme = program.scheme
    slots = {n: i for i, n in enumerate(program.arrays)}
    dt = c_literal(program.dt)
    lines = [f"/* driver for {program.name}; generated by fdgen, do not edit */",
             "#include <stdio.h>", "#include <stdlib.h>", "#include <string.h>",
             '#include "kernels.h"', ""]
    for name in consts.names:
        lines.append(f"double {c_name(name)} = {c_literal(consts.values[name])};")
    lines.append("")
    lines += _boundary_functions(program)
    interior = [f"for (long i{a} = {g.halo[a]}; i{a} < {g.halo[a] + g.shape[a]}; ++i{a})"
                for a in range(g.ndim)]
    lines += [
        "static int write_interior(const char *dir, const char *name, const double *a)",
        "{",
        "  char path[4096];",
        '  snprintf(path, sizeof path, "%s/%s.bin", dir, name);',
        '  FILE *fh = fopen(path, "wb");',
        "  if (!fh) return 1;",
        "  int bad = 0;",
    ]
    pad = "  "
    for loop in interior:
        lines.append(pad + loop)
        pad += "  "
    idx = ", ".join(f"i{a}" for a in range(g.ndim))
    lines += [f"{pad}bad |= fwrite(&a[IDX({idx})], sizeof(double), 1, fh) != 1;",
              "  bad |= fclose(fh) != 0;", "  return bad;", "}", ""]
    lines += [
        "int main(int argc, char **argv)",
        "{",
        '  const char *out = argc > 1 ? argv[1] : ".";',
        "  double *st[NARRAYS > 0 ? NARRAYS : 1];",
        "  for (int i = 0; i < NARRAYS; ++i) {",
        "    st[i] = calloc(PADDED_SIZE, sizeof(double));",
        '    if (!st[i]) { fprintf(stderr, "allocation failed\\n"); return 1; }',
        "  }",
        f"  {c_name('t')} = 0.0;",
    ]
    lines += [f"  {k.name}(st);" for k in program.init_kernels]
    lines.append(f"  for (long it = 0; it < {program.niter}L; ++it) {{")
    for s in range(scheme.stages):
        lines.append(f"    /* stage {s} */")
        lines.append(f"    {c_name('t')} = (double)it * {dt} + {c_literal(float(scheme.C[s]))} * {dt};")
        for name, v in scheme.stage_constants(s).items():
            lines.append(f"    {c_name(name)} = {c_literal(v)};")
        lines += _boundary_calls(program, "    ")
        lines += [f"    {k.name}(st);" for k in program.stage_kernels]
    lines.append("  }")
    lines.append("  int status = 0;")
    for name in program.prognostics:
        lines.append(f'  status |= write_interior(out, "{name}", st[{slots[name]}]);')
    lines += ["  for (int i = 0; i < NARRAYS; ++i) free(st[i]);",
              '  if (status) fprintf(stderr, "cannot write output\\n");',
              "  return status ? 3 : 0;", "}", ""]
    return "\n".join(lines)


def emit(program: Program, parallel: bool = False) -> EmittedSource:
    """Translate ``program`` (without diagnostics) to a kernels header and a driver."""
    return EmittedSource(_header(program, parallel), _driver(program))
