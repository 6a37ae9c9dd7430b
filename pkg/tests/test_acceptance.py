"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The lines are repeated in the pytest terminal summary.  The Taylor-Green
criterion runs the full 64^3 case to t=20 and dominates the runtime.
"""
import math
import shutil
import warnings
from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from fdgen.cli import converge, convergence_slope, max_errors, resolve_setup, run_setup
from fdgen.discretize import central_coefficients
from fdgen.io import read_snapshot
from fdgen.pipeline import compile_spec
from fdgen.runtime import Runtime, pairwise_sum

from builders import c_differential, make_spec, runtime
from test_einstein import _check_against_oracle

quiet = dict(log=lambda *a: None)


def test_wave_propagation(criterion):
    spec = resolve_setup("wave1d")
    assert spec.shape == (1000,) and spec.dt == 4e-4 and spec.spatial_order == 8
    rt = run_setup(spec, **quiet)
    err = max_errors(spec, rt)["phi"]
    ok = criterion(1, err <= 1e-8 and rt.time == pytest.approx(1.0),
                   f"wave1d max error {err:.3e} at t={rt.time:g} (<= 1e-8)")
    assert ok


def test_mms_convergence(criterion):
    spec = resolve_setup("mms2d")
    levels = [4, 8, 16, 32, 64]   # dx = pi/2 ... pi/32
    slopes, lines = {}, []
    for order in (2, 4, 6, 8, 10, 12):
        # dt honours Courant 0.025 and the diffusive stability limit of each stencil
        lv = converge(spec, order, levels, t_end=100.0, courant=0.025,
                      diffusivity=spec.constants["k"])
        slopes[order] = convergence_slope([l.dx for l in lv], [l.error for l in lv])
        floored = [l.n for l in lv if l.error < 1e-13]
        lines.append(f"order {order}: slope {slopes[order]:.3f}"
                     + (f", floored N={floored}" if floored else "")
                     + ", errors " + " ".join(f"{l.error:.2e}" for l in lv))
    for line in lines:
        print("  " + line)
    bad = [o for o in (2, 4, 6, 8) if not abs(slopes[o] - o) <= 0.3]
    info = ", ".join(f"{o}:{slopes[o]:.2f}" for o in (10, 12))
    ok = criterion(2, not bad, "slopes " + ", ".join(f"{o}:{slopes[o]:.2f}" for o in (2, 4, 6, 8))
                   + f" (+-0.3); informational {info}")
    assert ok, lines


def test_taylor_green_vortex(criterion):
    spec = resolve_setup("tgv3d")
    assert spec.shape == (64, 64, 64) and spec.dt == 3.385e-3
    rt = Runtime(compile_spec(spec))
    t, ke, ens = [], [], []

    def record(r):
        d = r.diagnostics()
        t.append(r.time)
        ke.append(d["kinetic_energy"])
        ens.append(d["enstrophy"])
    try:
        rt.run(every=[(1, record)])
    finally:
        rt.close()
    t, ke, ens = map(np.array, (t, ke, ens))
    a = abs(ke[0] - 0.125) <= 0.01 * 0.125
    late = t[:-1] > 4
    rise = float(np.max(np.diff(ke)[late]))
    b = rise <= 1e-6
    peak = int(np.argmax(ens))
    c = 8 <= t[peak] <= 10 and int(np.sum(ens == ens[peak])) == 1
    d = ens[-1] < 0.4 * ens[peak]
    detail = (f"(a) KE(0)={ke[0]:.6f} {'ok' if a else 'FAIL'}; "
              f"(b) max KE increase for t>4 {rise:.2e} {'ok' if b else 'FAIL'}; "
              f"(c) enstrophy peak {ens[peak]:.4f} at t={t[peak]:.3f} {'ok' if c else 'FAIL'}; "
              f"(d) enstrophy(t={t[-1]:.2f})/peak={ens[-1] / ens[peak]:.3f} "
              f"{'ok' if d else 'FAIL'}")
    ok = criterion(3, a and b and c and d, detail)
    assert ok, detail


def test_stencil_suite(criterion):
    checked = 0
    failures = []
    for degree in (1, 2):
        for acc in (2, 4, 6, 8, 10, 12):
            s = central_coefficients(degree, acc)
            for q in range(len(s.offsets)):
                m = sum(w * Fraction(k) ** q for k, w in zip(s.offsets, s.weights))
                if m != (factorial(degree) if q == degree else 0):
                    failures.append((degree, acc, "moment", q))
            h, x0 = Fraction(1, 3), Fraction(2, 7)
            for q in range(acc + degree):
                approx = sum(w * (x0 + k * h) ** q for k, w in zip(s.offsets, s.weights))
                exact = 0 if q < degree else \
                    Fraction(factorial(q), factorial(q - degree)) * x0 ** (q - degree)
                if approx / h ** degree != exact:
                    failures.append((degree, acc, "poly", q))
            checked += 1
    ok = criterion(4, not failures, f"{checked} stencils, exact moment and polynomial checks, "
                   f"{len(failures)} failures")
    assert ok, failures


def test_expansion_oracle(criterion):
    failures = []
    for seed in range(200):
        try:
            _check_against_oracle(seed)
        except AssertionError as exc:
            failures.append((seed, str(exc)[:80]))
    ok = criterion(5, not failures, f"200 random expressions, {len(failures)} mismatches")
    assert ok, failures


def test_conservation(criterion):
    rng = np.random.default_rng(2024)
    modes = " + ".join(f"{a:.6f}*sin(2*pi*({k}*x0 + {l}*x1) + {p:.6f})"
                       for a, k, l, p in zip(rng.uniform(0.02, 0.08, 4), rng.integers(1, 4, 4),
                                             rng.integers(-3, 4, 4), rng.uniform(0, 6.28, 4)))
    spec = make_spec(["Eq(Der(rho, t), -Conservative(rho*u_j, x_j))"], [f"rho = 1 + {modes}"],
                     ndim=2, shape=[32, 32], constants={"u": [0.8, -0.35]}, order=4,
                     dt=1e-3, niter=1000)
    rt = runtime(spec)
    mass = []
    rt.run(every=[(1, lambda r: mass.append(pairwise_sum(r.state.interior("rho"))))])
    m = np.array(mass)
    drift = float(np.max(np.abs(np.diff(m))) / abs(m[0]))
    ok = criterion(6, drift <= 1e-12 and len(m) == 1001,
                   f"max relative mass change per step {drift:.2e} over {len(m) - 1} steps "
                   "(<= 1e-12)")
    assert ok


def test_determinism(criterion, tmp_path):
    detail = []
    ok = True
    for case, shape, niter in (("wave1d", None, None), ("tgv3d", (32, 32, 32), 40)):
        spec = resolve_setup(case)
        if shape:
            spec = spec.with_grid(shape)
        ref, same = None, True
        for workers in (1, 2, 4, 8):
            out = tmp_path / f"{case}_{workers}"
            rt = run_setup(spec, threads=workers, out=out, snapshot_every=0, niter=niter,
                           **quiet)
            _, data = read_snapshot(out / f"snap_{rt.iteration:08d}")
            blob = b"".join(data[n].tobytes() for n in sorted(data))
            if ref is None:
                ref = blob
            same &= blob == ref
        ok &= same
        detail.append(f"{case} {rt.iteration} steps {'identical' if same else 'DIFFER'}")
    ok = criterion(7, ok, "; ".join(detail) + " for 1, 2, 4, 8 workers")
    assert ok


def test_emitted_c_differential(criterion, tmp_path):
    import os
    cc = os.environ.get("CC") or shutil.which("gcc") or shutil.which("cc")
    if cc is None:
        warnings.warn("no C compiler found; emitted-C differential test skipped")
        criterion(8, True, "SKIPPED (no C compiler)")
        pytest.skip("no C compiler")
    detail, ok = [], True
    for case, shape in (("wave1d", (200,)), ("mms2d", (32, 32))):
        spec = resolve_setup(case).with_grid(shape)
        d = tmp_path / case
        d.mkdir()
        out = c_differential(compile_spec(spec, diagnostics=False), cc, d)
        for name, (c, py) in out.items():
            ulps = int(np.max(np.abs(c.view(np.int64) - py.view(np.int64))))
            ok &= ulps == 0
            detail.append(f"{case} {name} {spec.niter} steps {ulps} ULP")
    ok = criterion(8, ok, "; ".join(detail))
    assert ok


def test_rk3_order(criterion):
    slopes = {}
    steps = [10, 20, 40, 80, 160]
    for scheme in ("RK3", "Euler"):
        errors = []
        for n in steps:
            spec = make_spec(["Eq(Der(y, t), -y)"], ["y = 1"], shape=[1], temporal=scheme,
                             dt=1.0 / n, niter=n)
            rt = runtime(spec)
            rt.run()
            errors.append(abs(float(rt.state.interior("y")[0]) - math.exp(-1.0)))
        slopes[scheme] = float(np.polyfit(np.log([1.0 / n for n in steps]), np.log(errors), 1)[0])
    ok = criterion(9, abs(slopes["RK3"] - 3) <= 0.1 and abs(slopes["Euler"] - 1) <= 0.1,
                   f"y'=-y slopes RK3 {slopes['RK3']:.3f} (3 +- 0.1), "
                   f"Euler {slopes['Euler']:.3f} (1 +- 0.1)")
    assert ok
