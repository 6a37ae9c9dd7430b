import re
import subprocess

import numpy as np
import pytest

from fdgen.cli import resolve_setup
from fdgen.codegen import COMPILE_FLAGS, CKernelPrinter, c_literal, emit
from fdgen.discretize import ir
from fdgen.errors import UnsupportedConstruct
from fdgen.pipeline import compile_spec

from builders import c_differential, make_spec


def derivative_program(**kw):
    spec = make_spec(["Eq(Der(f, t), Der(f, x0))"], ["f = sin(2*pi*x0)"], ndim=2,
                     shape=[6, 5], **kw)
    return compile_spec(spec, diagnostics=False)


def test_first_derivative_kernel_text():
    src = emit(derivative_program()).kernels_header
    m = re.search(r"\(c_(rc\d+) \* \(st\[(\d+)\]\[n \+ s0\] - st\[\2\]\[n - s0\]\)\)", src)
    assert m, src
    assert "extern double c_" + m.group(1) in src


def test_literals_round_trip():
    for v in (0.1, 1.0, 1e-300, 2.0 / 3.0, -5.0 / 9.0, 1.5e17):
        text = c_literal(v)
        assert float(text) == v and ("." in text or "e" in text)
    with pytest.raises(UnsupportedConstruct):
        c_literal(float("inf"))


def test_emission_is_deterministic():
    a, b = emit(derivative_program()), emit(derivative_program())
    assert a == b


def test_unsupported_constructs():
    # the parser admits only functions with a C lowering, so build the IR directly
    printer = CKernelPrinter({"f": 0}.__getitem__, ["a"].index, 1)
    with pytest.raises(UnsupportedConstruct, match="cosh"):
        printer.expr(ir.Call("cosh", ir.Load("f", (0,))))
    with pytest.raises(UnsupportedConstruct):
        printer.expr(ir.Bin("*", ir.Num(float("nan")), ir.Load("f", (0,))))
    assert printer.expr(ir.Call("sin", ir.Const("a"))) == "sin(c_a)"


def _build(src, tmp_path, cc, extra=()):
    header, driver = src.write(tmp_path)
    exe = tmp_path / "prog"
    subprocess.run([cc, *COMPILE_FLAGS, "-Wall", "-Werror", *extra, "-o", str(exe),
                    str(driver), "-lm"], check=True, capture_output=True, text=True)
    return exe


def test_program_without_steps_compiles(tmp_path, c_compiler):
    exe = _build(emit(derivative_program(niter=0)), tmp_path, c_compiler)
    subprocess.run([str(exe), str(tmp_path)], check=True)
    f = np.fromfile(tmp_path / "f.bin", dtype="<f8").reshape(6, 5)
    x = np.arange(6) / 6
    assert np.allclose(f, np.sin(2 * np.pi * x)[:, None], atol=1e-15)


def test_parallel_annotations_compile_serially(tmp_path, c_compiler):
    src = emit(derivative_program(), parallel=True)
    assert "#pragma omp parallel for" in src.kernels_header
    _build(src, tmp_path, c_compiler)


def test_unwritable_output_directory(tmp_path, c_compiler):
    exe = _build(emit(derivative_program()), tmp_path, c_compiler)
    r = subprocess.run([str(exe), str(tmp_path / "missing" / "dir")], capture_output=True)
    assert r.returncode == 3


@pytest.mark.parametrize("case,shape,niter", [("wave1d", (200,), 50), ("mms2d", (32, 32), 40)])
def test_c_matches_runtime_bitwise(tmp_path, c_compiler, case, shape, niter):
    spec = resolve_setup(case).with_grid(shape)
    spec.niter = niter
    out = c_differential(compile_spec(spec, diagnostics=False), c_compiler, tmp_path)
    for name, (c, py) in out.items():
        assert np.array_equal(c.view(np.int64), py.view(np.int64)), name


def test_symmetry_boundaries_match_runtime(tmp_path, c_compiler):
    spec = make_spec(["Eq(Der(u_i, t), Der(Der(u_i, x_j), x_j) - u_j*Der(u_i, x_j))"],
                     ["u0 = sin(2*pi*x0)*cos(pi*x1)", "u1 = cos(pi*x0)*x1*x1"], ndim=2,
                     shape=[9, 7], order=4, dt=1e-4, niter=20,
                     boundary=[{"direction": 0, "kind": "symmetry"},
                               {"direction": 1, "kind": "periodic"}])
    out = c_differential(compile_spec(spec, diagnostics=False), c_compiler, tmp_path)
    for name, (c, py) in out.items():
        assert np.array_equal(c.view(np.int64), py.view(np.int64)), name
