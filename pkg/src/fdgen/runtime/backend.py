"""Numba backend: kernels are printed as Python source, written to a cache
directory keyed by the source hash, imported and compiled ahead of the run.

Grid sizes, strides, halos and constant values are runtime arguments, so the
same compiled module serves every grid level of a convergence study.
"""
from __future__ import annotations

import hashlib
import importlib.util
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence

from ..discretize import Kernel, ir

SIGNATURE = "void(float64[:, ::1], float64[::1], int64[::1], int64[::1], int64[::1], int64[::1])"


def cache_dir() -> Path:
    path = os.environ.get("FDGEN_CACHE_DIR")
    if path:
        return Path(path)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "fdgen"


def used(kernel: Kernel):
    consts, axes_c = set(), set()
    for st in kernel.statements:
        for n in ir.walk(st.value):
            if isinstance(n, ir.Const):
                consts.add(n.name)
            elif isinstance(n, ir.Coord):
                consts.add(f"delta{n.axis}")
                axes_c.add(n.axis)
            elif isinstance(n, ir.GridIndex):
                axes_c.add(n.axis)
    return sorted(consts), sorted(axes_c)


def kernel_body(kernel: Kernel, printer: ir.Printer, indent: str, ndim: int) -> list[str]:
    """Loop nest over the padded index range; ``n`` is the flat offset of the point."""
    lines = []
    pad = indent
    for a in range(ndim):
        lines.append(f"{pad}" + printer.loop(a))
        pad += printer.step
    lines.append(f"{pad}{printer.declare_index()}n = {printer.flat_index(ndim)}{printer.end}")
    for st in kernel.statements:
        rhs = printer.expr(st.value)
        if isinstance(st.target, ir.Local):
            lines.append(f"{pad}{printer.declare_local()}l_{st.target.name} = {rhs}{printer.end}")
        else:
            store = printer.load(ir.Load(st.target.array, (0,) * ndim))
            lines.append(f"{pad}{store} = {rhs}{printer.end}")
    for a in reversed(range(ndim)):
        pad = pad[: -len(printer.step)]
        closing = printer.close_loop()
        if closing:
            lines.append(pad + closing)
    return lines


class NumbaPrinter(ir.PythonPrinter):
    step = "    "
    end = ""

    def loop(self, a: int) -> str:
        return f"for i{a} in range(lo[{a}], hi[{a}]):"

    def close_loop(self) -> str:
        return ""

    def declare_index(self) -> str:
        return ""

    def flat_index(self, ndim: int) -> str:
        return " + ".join([f"i{a} * s{a}" for a in range(ndim - 1)] + [f"i{ndim - 1}"])

    def declare_local(self) -> str:
        return ""


def kernel_source(kernel: Kernel, slot: Callable[[str], int], const_index: Callable[[str], int],
                  ndim: int) -> str:
    p = NumbaPrinter(slot, const_index, ndim)
    consts, axes = used(kernel)
    lines = [f"@njit(SIG, cache=True, nogil=True, error_model='numpy')",
             f"def {kernel.name}(st, c, lo, hi, s, h):"]
    for a in range(ndim - 1):
        lines.append(f"    s{a} = s[{a}]")
    for a in axes:
        lines.append(f"    h{a} = h[{a}]")
    for name in consts:
        lines.append(f"    c_{name} = c[{const_index(name)}]")
    lines += kernel_body(kernel, p, "    ", ndim)
    return "\n".join(lines) + "\n"


def module_source(kernels: Sequence[Kernel], slot, const_index, ndim: int) -> str:
    parts = ["# generated by fdgen; do not edit\n",
             "import math\n", "from numba import njit\n\n",
             f"SIG = {SIGNATURE!r}\n"]
    seen = set()
    for k in kernels:
        if k.name in seen:
            raise ValueError(f"duplicate kernel name {k.name}")
        seen.add(k.name)
        parts.append("\n\n" + kernel_source(k, slot, const_index, ndim))
    return "".join(parts)


_LOADED: dict[str, object] = {}


def load_module(source: str):
    """Write ``source`` to the cache (once) and import it; repeated loads are memoised."""
    digest = hashlib.sha1(source.encode()).hexdigest()[:20]
    if digest in _LOADED:
        return _LOADED[digest]
    directory = cache_dir()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"fdk_{digest}.py"
    if not path.exists() or path.read_text() != source:
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(source)
        os.replace(tmp, path)
    name = f"fdgen_kernels_{digest}"
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    _LOADED[digest] = module
    return module


def compile_kernels(kernels: Sequence[Kernel], slot, const_index, ndim: int) -> dict:
    module = load_module(module_source(kernels, slot, const_index, ndim))
    return {k.name: getattr(module, k.name) for k in kernels}
