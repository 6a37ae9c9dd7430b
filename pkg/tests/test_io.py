import copy
import math

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fdgen.cli import case_path
from fdgen.errors import ConfigError, DimensionError, FDError, SnapshotIOError, SymbolError
from fdgen.grid import create_grid
from fdgen.io import (append_diagnostics, read_diagnostics, read_setup, read_snapshot,
                      spec_from_dict, write_snapshot)


def base_doc():
    return yaml.safe_load(case_path("wave1d").read_text())


def test_bundled_tgv_setup():
    spec = read_setup(case_path("tgv3d"))
    assert spec.ndim == 3 and spec.shape == (64, 64, 64)
    assert spec.deltas[0] == pytest.approx(2 * math.pi / 64)
    assert spec.niter == 5909 and spec.temporal == "RK3" and spec.spatial_order == 4
    assert spec.io.density == "rho" and spec.io.velocity == "u"


def test_undeclared_symbol():
    doc = base_doc()
    doc["problem"]["equations"] = ["Eq(Der(phi, t), -Conservative(phi*w, x0))"]
    with pytest.raises(SymbolError) as info:
        spec_from_dict(doc)
    assert info.value.symbols == ("w",)


def test_wrong_number_of_deltas():
    doc = base_doc()
    doc["problem"]["ndim"] = 3
    doc["problem"]["constants"] = {"c": [0.5, 0, 0]}
    doc["grid"] = {"shape": [4, 4, 4], "deltas": [0.1, 0.1]}
    with pytest.raises(DimensionError):
        spec_from_dict(doc)


@pytest.mark.parametrize("path,value,key", [
    (("schemes", "spatial_order"), 3, "schemes.spatial_order"),
    (("schemes", "dt"), -1.0, "schemes.dt"),
    (("schemes", "temporal"), "RK4", "schemes.temporal"),
    (("grid", "shape"), [0], "grid.shape"),
    (("boundary",), [], "boundary"),
])
def test_invalid_entries_name_their_key(path, value, key):
    doc = base_doc()
    target = doc
    for p in path[:-1]:
        target = target[p]
    target[path[-1]] = value
    with pytest.raises(ConfigError) as info:
        spec_from_dict(doc)
    assert info.value.key == key


def test_missing_initial_condition():
    doc = base_doc()
    doc["initial"] = []
    with pytest.raises(ConfigError, match="no initial condition"):
        spec_from_dict(doc)


def test_t_end_sets_step_count():
    spec = spec_from_dict(base_doc())
    assert spec.niter == 2500


# ------------------------------------------------------------------ snapshots

def test_snapshot_size(tmp_path):
    g = create_grid(2, (2, 2), (1.0, 1.0), 1)
    out = write_snapshot({"f": np.arange(4.0).reshape(2, 2)}, g, 0.5, 3, tmp_path / "s")
    assert (out / "f.bin").stat().st_size == 32
    meta, data = read_snapshot(out)
    assert meta["time"] == 0.5 and meta["iteration"] == 3 and meta["shape"] == [2, 2]
    assert meta["fields"][0]["dtype"] == "f64le"


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_snapshot_round_trip_is_bitwise(tmp_path_factory, data):
    g = create_grid(2, data.shape, (0.1, 0.2), 0)
    out = write_snapshot({"a": data, "b": -data}, g, 1.25, 7,
                         tmp_path_factory.mktemp("snap"))
    _, back = read_snapshot(out)
    assert back["a"].tobytes() == data.tobytes()
    assert back["b"].tobytes() == (-data).tobytes()


def test_snapshot_shape_mismatch(tmp_path):
    g = create_grid(1, (4,), (1.0,), 0)
    with pytest.raises(SnapshotIOError):
        write_snapshot({"f": np.zeros(3)}, g, 0.0, 0, tmp_path)


def test_unwritable_snapshot_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    g = create_grid(1, (4,), (1.0,), 0)
    with pytest.raises(SnapshotIOError):
        write_snapshot({"f": np.zeros(4)}, g, 0.0, 0, blocker / "snap")


def test_missing_setup_file(tmp_path):
    with pytest.raises(SnapshotIOError):
        read_setup(tmp_path / "absent.yaml")


# ------------------------------------------------------------------ diagnostics log

def test_diagnostics_log(tmp_path):
    path = tmp_path / "diag.csv"
    append_diagnostics({"t": 0.0, "kinetic_energy": 0.125, "enstrophy": 0.375}, path)
    append_diagnostics({"t": 0.1, "kinetic_energy": 0.1249, "enstrophy": 0.3751}, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,kinetic_energy,enstrophy"
    assert lines[1] == "0,0.125,0.375"
    rows = read_diagnostics(path)
    assert [r["t"] for r in rows] == [0.0, 0.1]
    assert rows[1]["enstrophy"] == 0.3751


# ------------------------------------------------------------------ fuzzing

scalars = st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.floats(allow_nan=False),
                    st.text(max_size=8), st.lists(st.integers(0, 3), max_size=3))
paths = st.sampled_from([
    ("problem", "ndim"), ("problem", "equations"), ("problem", "constants"),
    ("problem", "constants", "c"), ("grid", "shape"), ("grid", "lengths"),
    ("schemes", "spatial_order"), ("schemes", "dt"), ("schemes", "t_end"),
    ("schemes", "temporal"), ("boundary",), ("initial",), ("io",), ("io", "exact"),
    ("io", "check_every"), ("problem",), ("grid",),
])


@given(st.lists(st.tuples(paths, scalars), min_size=1, max_size=3))
def test_invalid_documents_give_structured_errors(edits):
    doc = base_doc()
    for path, value in edits:
        target = doc
        for p in path[:-1]:
            if not isinstance(target.get(p), dict):
                target[p] = {}
            target = target[p]
        target[path[-1]] = copy.deepcopy(value)
    try:
        spec_from_dict(doc)
    except FDError:
        pass
