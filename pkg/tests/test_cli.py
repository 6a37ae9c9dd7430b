import re
import subprocess

import numpy as np
import pytest
import yaml

from fdgen.cli import (EXIT_BLOWUP, EXIT_CONFIG, EXIT_IO, EXIT_OK, case_names, case_path,
                       convergence_slope, courant_dt, main, resolve_setup,
                       second_derivative_radius)
from fdgen.codegen import COMPILE_FLAGS
from fdgen.io import read_snapshot


def test_run_wave_case(capsys):
    assert main(["run", "wave1d"]) == EXIT_OK
    out = capsys.readouterr().out
    err = float(re.search(r"max \|phi - exact\| = (\S+)", out).group(1))
    assert err <= 1e-8
    assert "2500 steps" in out


def test_invalid_setup_exit_code(tmp_path, capsys):
    doc = yaml.safe_load(case_path("wave1d").read_text())
    doc["schemes"]["spatial_order"] = 5
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(doc))
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "schemes.spatial_order" in capsys.readouterr().err
    assert main(["run", "no-such-case"]) == EXIT_CONFIG


def test_blowup_exit_code(tmp_path):
    doc = yaml.safe_load(case_path("wave1d").read_text())
    doc["schemes"].update({"dt": 0.5, "t_end": 100.0})
    path = tmp_path / "unstable.yaml"
    path.write_text(yaml.safe_dump(doc))
    assert main(["run", str(path), "--check-every", "1"]) == EXIT_BLOWUP


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "wave1d", "--niter", "1", "--out", str(blocker / "x")]) == EXIT_IO


def test_thread_count_does_not_change_snapshots(tmp_path):
    out = {}
    for threads in (1, 4):
        d = tmp_path / f"t{threads}"
        assert main(["run", "mms2d", "--niter", "30", "--threads", str(threads),
                     "--out", str(d)]) == EXIT_OK
        out[threads] = read_snapshot(d / "snap_00000030")[1]["phi"]
    assert out[1].tobytes() == out[4].tobytes()


def test_snapshots_and_diagnostics_written(tmp_path):
    assert main(["run", "wave1d", "--niter", "10", "--snapshot-every", "5",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == \
        ["snap_00000000", "snap_00000005", "snap_00000010"]
    meta, data = read_snapshot(tmp_path / "snap_00000010")
    assert meta["iteration"] == 10 and data["phi"].shape == (1000,)


def test_emit_latex(tmp_path):
    assert main(["emit", "tgv3d", "--target", "latex", "--out", str(tmp_path)]) == EXIT_OK
    tex = (tmp_path / "tgv3d.tex").read_text()
    for name in (r"\rho", "rhou_{0}", "rhou_{1}", "rhou_{2}", "rhoE"):
        assert name in tex, name


def test_emit_c_compiles(tmp_path, c_compiler):
    assert main(["emit", "wave1d", "--target", "c", "--out", str(tmp_path)]) == EXIT_OK
    subprocess.run([c_compiler, *COMPILE_FLAGS, "-o", str(tmp_path / "a.out"),
                    str(tmp_path / "driver.c"), "-lm"], check=True)


def test_unknown_target_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["emit", "wave1d", "--target", "fortran"])
    assert info.value.code == 2


def test_cases_listing(capsys):
    assert main(["cases"]) == EXIT_OK
    out = capsys.readouterr().out
    assert set(case_names()) == {"wave1d", "mms2d", "tgv3d"}
    for name in case_names():
        assert re.search(rf"^{name}\s+\S", out, re.M)


def test_convergence_helpers():
    dx = [0.4, 0.2, 0.1, 0.05]
    assert convergence_slope(dx, [h ** 4 for h in dx]) == pytest.approx(4.0)
    # levels at the machine floor are ignored
    assert convergence_slope(dx, [0.4 ** 2, 0.2 ** 2, 1e-15, 1e-16]) == pytest.approx(2.0)
    assert np.isnan(convergence_slope(dx, [1e-16] * 4))
    spec = resolve_setup("mms2d")
    dt, n = courant_dt(spec, 0.1, 0.025, 100.0)
    assert n * dt == pytest.approx(100.0) and dt * 1.0 / 0.1 <= 0.025


def test_diffusive_cap_keeps_rk3_stable():
    spec = resolve_setup("mms2d")
    dx = 2 * np.pi / 64
    for order in (2, 8, 12):
        spec.spatial_order = order
        dt, n = courant_dt(spec, dx, 0.025, 100.0, diffusivity=0.75)
        assert dt <= 0.025 * dx
        # most negative eigenvalue of the 2-D diffusion operator stays inside the RK3 region
        z = -2 * 0.75 * dt * second_derivative_radius(order) / dx ** 2
        assert abs(1 + z + z * z / 2 + z ** 3 / 6) <= 1.0
    assert second_derivative_radius(2) == pytest.approx(4.0)
