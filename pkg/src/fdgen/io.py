"""Setup files, field snapshots and the diagnostics log.

A setup is a YAML document with sections ``problem``, ``grid``, ``schemes``,
``boundary``, ``initial`` and ``io``; see the README for the schema.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import (ConfigError, DimensionError, FDError, ParseError, SnapshotIOError,
                     SymbolError)
from .expr import EinsteinTerm, Equation, evaluate, parse_equation, parse_expression

SNAPSHOT_VERSION = 1
BUILTIN_CONSTANTS = {"pi": math.pi}
DIAGNOSTIC_COLUMNS = ("t", "kinetic_energy", "enstrophy")


@dataclass
class BoundarySpec:
    kind: str
    direction: int
    side: str = "both"


@dataclass
class IOSpec:
    snapshot_every: int = 0
    diagnostics_every: int = 0
    check_every: int = 100
    density: str | None = None
    velocity: str | None = None
    exact: dict[str, str] = field(default_factory=dict)


@dataclass
class ProblemSpec:
    name: str
    ndim: int
    equations: list[str]
    substitutions: list[str]
    formulas: list[str]
    constants: dict[str, Any]
    shape: tuple[int, ...]
    deltas: tuple[float, ...]
    spatial_order: int
    temporal: str
    dt: float
    niter: int
    boundaries: list[BoundarySpec]
    initial: list[str]
    io: IOSpec = field(default_factory=IOSpec)
    source: str | None = None

    @property
    def constant_names(self) -> set[str]:
        names = set(self.constants) | set(BUILTIN_CONSTANTS) | {"dt"}
        for k, v in self.constants.items():
            if isinstance(v, (list, tuple)):
                names |= {f"{k}{i}" for i in range(len(v))}
        return names

    def constant_values(self) -> dict[str, float]:
        """Scalar constants, with vector constants split into ``name0, name1, ...``."""
        out = dict(BUILTIN_CONSTANTS)
        out["dt"] = float(self.dt)
        for k, v in self.constants.items():
            if isinstance(v, (list, tuple)):
                for i, x in enumerate(v):
                    out[f"{k}{i}"] = float(x)
            else:
                out[k] = float(v)
        for a, d in enumerate(self.deltas):
            out[f"delta{a}"] = float(d)
        return out

    def with_grid(self, shape, deltas=None) -> "ProblemSpec":
        """Copy with another grid resolution over the same domain lengths."""
        lengths = [n * d for n, d in zip(self.shape, self.deltas)]
        out = copy.deepcopy(self)
        out.shape = tuple(int(n) for n in shape)
        out.deltas = tuple(deltas) if deltas is not None else \
            tuple(L / n for L, n in zip(lengths, out.shape))
        return out


# ---------------------------------------------------------------------------
# reading

def _get(doc: Mapping, key: str, path: str, kind=None, default=...):
    if not isinstance(doc, Mapping):
        raise ConfigError(path, "expected a mapping")
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing")
        return default
    value = doc[key]
    if kind is not None and (not isinstance(value, kind)
                             or (isinstance(value, bool) and kind is not bool)):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _string_list(value, path: str) -> list[str]:
    if isinstance(value, Mapping):
        value = list(value.values())
    if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
        raise ConfigError(path, "expected a list of strings")
    return list(value)


def _assignment(text: str) -> str:
    """Accept ``name = expr`` as shorthand for ``Eq(name, expr)``."""
    text = text.strip()
    if text.startswith("Eq("):
        return text
    if "=" not in text:
        raise ParseError(f"expected 'name = expression' or 'Eq(name, expression)': {text!r}")
    lhs, rhs = text.split("=", 1)
    return f"Eq({lhs.strip()}, {rhs.strip()})"


def _symbols(e) -> set[str]:
    return {n.name for n in e.walk()
            if isinstance(n, EinsteinTerm) and not (n.is_constant or n.is_coordinate
                                                    or n.is_time or n.is_grid_index)}


def _target(eq: Equation, path: str) -> str:
    lhs = eq.lhs
    if hasattr(lhs, "head") and lhs.head == "Der":
        lhs = lhs.args[0]
    if not isinstance(lhs, EinsteinTerm):
        raise ConfigError(path, f"left-hand side must be a symbol or Der(symbol, t), got {lhs}")
    return lhs.name


def spec_from_dict(doc: Mapping, source: str | None = None) -> ProblemSpec:
    if not isinstance(doc, Mapping):
        raise ConfigError("", "setup must be a mapping of sections")
    problem = _get(doc, "problem", "", Mapping)
    grid = _get(doc, "grid", "", Mapping)
    schemes = _get(doc, "schemes", "", Mapping)
    name = str(problem.get("name", Path(source).stem if source else "problem"))
    ndim = _get(problem, "ndim", "problem", int)
    if ndim not in (1, 2, 3):
        raise ConfigError("problem.ndim", f"must be 1, 2 or 3, got {ndim}")

    constants = dict(_get(problem, "constants", "problem", Mapping, {}))
    for k, v in constants.items():
        path = f"problem.constants.{k}"
        if not isinstance(k, str) or not k.isidentifier() or "_" in k:
            raise ConfigError(path, "constant names must be identifiers without underscores")
        if isinstance(v, list):
            if len(v) != ndim:
                raise DimensionError(f"{path}: vector constant needs {ndim} components")
            constants[k] = [_number(x, path) for x in v]
        else:
            constants[k] = _number(v, path)

    equations = _string_list(_get(problem, "equations", "problem"), "problem.equations")
    substitutions = _string_list(problem.get("substitutions", []), "problem.substitutions")
    formulas = _string_list(problem.get("formulas", []), "problem.formulas")
    if not equations:
        raise ConfigError("problem.equations", "at least one equation is required")

    shape = _get(grid, "shape", "grid", list)
    if len(shape) != ndim:
        raise DimensionError(f"grid.shape: {len(shape)} sizes for ndim={ndim}")
    if not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in shape):
        raise ConfigError("grid.shape", "sizes must be positive integers")
    if "deltas" in grid:
        deltas = [_number(d, "grid.deltas") for d in _get(grid, "deltas", "grid", list)]
    elif "lengths" in grid:
        lengths = [_evaluate_length(x, "grid.lengths") for x in _get(grid, "lengths", "grid", list)]
        if len(lengths) != ndim:
            raise DimensionError(f"grid.lengths: {len(lengths)} lengths for ndim={ndim}")
        deltas = [L / n for L, n in zip(lengths, shape)]
    else:
        raise ConfigError("grid", "either deltas or lengths is required")
    if len(deltas) != ndim:
        raise DimensionError(f"grid.deltas: {len(deltas)} deltas for ndim={ndim}")
    if any(d <= 0 for d in deltas):
        raise ConfigError("grid.deltas", "spacings must be positive")

    order = _get(schemes, "spatial_order", "schemes", int, 2)
    if order < 2 or order % 2:
        raise ConfigError("schemes.spatial_order", f"must be an even integer >= 2, got {order}")
    temporal = str(_get(schemes, "temporal", "schemes", str, "RK3"))
    if temporal.lower().replace("_", "").replace("-", "") not in (
            "rk3", "rk3lowstorage", "euler", "forwardeuler"):
        raise ConfigError("schemes.temporal", f"unknown scheme {temporal!r}")
    dt = _number(_get(schemes, "dt", "schemes"), "schemes.dt")
    if dt <= 0:
        raise ConfigError("schemes.dt", "must be positive")
    if "niter" in schemes:
        niter = _get(schemes, "niter", "schemes", int)
    elif "t_end" in schemes:
        t_end = _number(schemes["t_end"], "schemes.t_end")
        niter = int(math.ceil(t_end / dt - 1e-9))
    else:
        raise ConfigError("schemes", "either niter or t_end is required")
    if niter < 0:
        raise ConfigError("schemes.niter", "must be non-negative")

    boundaries = []
    raw_bc = _get(doc, "boundary", "", list)
    for i, b in enumerate(raw_bc):
        path = f"boundary[{i}]"
        kind = str(_get(b, "kind", path, str)).lower()
        direction = _get(b, "direction", path, int)
        if not 0 <= direction < ndim:
            raise DimensionError(f"{path}.direction: {direction} outside 0..{ndim - 1}")
        if kind == "periodic":
            boundaries.append(BoundarySpec("periodic", direction))
        elif kind == "symmetry":
            side = _get(b, "side", path, str, "both")
            sides = ("left", "right") if side == "both" else (side,)
            for s in sides:
                if s not in ("left", "right"):
                    raise ConfigError(f"{path}.side", f"expected left, right or both, got {s!r}")
                boundaries.append(BoundarySpec("symmetry", direction, s))
        else:
            raise ConfigError(f"{path}.kind", f"unknown boundary kind {kind!r}")
    covered = {b.direction for b in boundaries}
    if covered != set(range(ndim)):
        raise ConfigError("boundary", f"no boundary condition for direction(s) "
                          f"{sorted(set(range(ndim)) - covered)}")

    initial = _string_list(_get(doc, "initial", "", None), "initial")

    io_doc = doc.get("io", {}) or {}
    if not isinstance(io_doc, Mapping):
        raise ConfigError("io", "expected a mapping")
    diag = io_doc.get("diagnostics") or {}
    if not isinstance(diag, Mapping):
        raise ConfigError("io.diagnostics", "expected a mapping")
    exact = io_doc.get("exact", {}) or {}
    if not isinstance(exact, Mapping):
        raise ConfigError("io.exact", "expected a mapping of field name to expression")
    io = IOSpec(
        snapshot_every=int(_get(io_doc, "snapshot_every", "io", int, 0)),
        diagnostics_every=int(_get(diag, "every", "io.diagnostics", int, 1 if diag else 0)),
        check_every=int(_get(io_doc, "check_every", "io", int, 100)),
        density=diag.get("density"),
        velocity=diag.get("velocity"),
        exact={str(k): str(v) for k, v in exact.items()},
    )
    spec = ProblemSpec(name, ndim, equations, substitutions, formulas, constants,
                       tuple(shape), tuple(float(d) for d in deltas), order, temporal, dt, niter,
                       boundaries, initial, io, source)
    check_symbols(spec)
    return spec


def _evaluate_length(value, path: str) -> float:
    if isinstance(value, str):
        try:
            return float(evaluate(parse_expression(value, BUILTIN_CONSTANTS), BUILTIN_CONSTANTS))
        except (FDError, KeyError, TypeError) as exc:
            raise ConfigError(path, f"cannot evaluate {value!r}: {exc}") from None
    return _number(value, path)


def check_symbols(spec: ProblemSpec) -> None:
    """Every symbol must be prognostic, a formula or substitution target, or a constant."""
    consts = spec.constant_names

    def parse(text, path):
        try:
            return parse_equation(text, consts)
        except FDError as exc:
            raise ConfigError(path, str(exc)) from None

    eqs = [parse(s, f"problem.equations[{i}]") for i, s in enumerate(spec.equations)]
    subs = [parse(s, f"problem.substitutions[{i}]") for i, s in enumerate(spec.substitutions)]
    forms = [parse(_assignment(s), f"problem.formulas[{i}]") for i, s in enumerate(spec.formulas)]
    for i, eq in enumerate(eqs):
        lhs = eq.lhs
        if not (hasattr(lhs, "head") and lhs.head == "Der"):
            raise ConfigError(f"problem.equations[{i}]", "left-hand side must be Der(field, t)")
    declared = {_target(e, "problem.equations") for e in eqs}
    declared |= {_target(e, "problem.substitutions") for e in subs}
    declared |= {_target(e, "problem.formulas") for e in forms}
    used = set()
    for e in eqs + subs + forms:
        used |= _symbols(e.rhs) | _symbols(e.lhs)
    missing = used - declared
    if missing:
        raise SymbolError(missing)

    known: set[str] = set()

    def unknown(names):
        # an indexed name is defined either as a whole or component by component
        return {n for n in names if n not in known
                and not all(f"{n}{a}" in known for a in range(spec.ndim))}

    for i, text in enumerate(spec.initial):
        eq = parse(_assignment(text), f"initial[{i}]")
        target = _target(eq, f"initial[{i}]")
        missing = unknown(_symbols(eq.rhs))
        if missing:
            raise SymbolError(missing)
        known.add(target)
    prognostic = unknown({_target(e, "") for e in eqs})
    if prognostic:
        raise ConfigError("initial", f"no initial condition for {sorted(prognostic)}")
    for name, text in spec.io.exact.items():
        try:
            e = parse_expression(text, consts)
        except FDError as exc:
            raise ConfigError(f"io.exact.{name}", str(exc)) from None
        if _symbols(e):
            raise SymbolError(_symbols(e))


def read_setup(path) -> ProblemSpec:
    """Load and validate a YAML setup document."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read setup {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML in {path}: {exc}") from None
    return spec_from_dict(doc, str(path))


# ---------------------------------------------------------------------------
# snapshots

def write_snapshot(state: Mapping[str, np.ndarray], grid, t: float, iteration: int,
                   path) -> Path:
    """Write interior data as ``<name>.bin`` (f64 little-endian, row-major) plus ``meta.json``."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        entries = []
        for name, data in state.items():
            arr = np.ascontiguousarray(data, dtype="<f8")
            if tuple(arr.shape) != tuple(grid.shape):
                raise SnapshotIOError(f"field {name} has shape {arr.shape}, grid is {grid.shape}")
            fname = f"{name}.bin"
            arr.tofile(path / fname)
            entries.append({"name": name, "offset_file": fname, "dtype": "f64le",
                            "layout": "row-major"})
        meta = {"version": SNAPSHOT_VERSION, "ndim": grid.ndim, "shape": list(grid.shape),
                "deltas": list(grid.deltas), "time": float(t), "iteration": int(iteration),
                "fields": entries}
        (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    except OSError as exc:
        raise SnapshotIOError(f"cannot write snapshot to {path}: {exc}") from None
    return path


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
        shape = tuple(meta["shape"])
        data = {f["name"]: np.fromfile(path / f["offset_file"], dtype="<f8").reshape(shape)
                for f in meta["fields"]}
    except (OSError, KeyError, ValueError) as exc:
        raise SnapshotIOError(f"cannot read snapshot {path}: {exc}") from None
    return meta, data


# ---------------------------------------------------------------------------
# diagnostics log

def append_diagnostics(row, path) -> None:
    """Append ``t,kinetic_energy,enstrophy`` with 17 significant digits; header on first write."""
    values = row if isinstance(row, Mapping) else row.as_dict()
    path = Path(path)
    try:
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(DIAGNOSTIC_COLUMNS)
            w.writerow(["%.17g" % float(values.get(c, float("nan"))) for c in DIAGNOSTIC_COLUMNS])
    except OSError as exc:
        raise SnapshotIOError(f"cannot append diagnostics to {path}: {exc}") from None


def read_diagnostics(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def ensure_writable(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        if not os.access(path, os.W_OK):
            raise OSError("permission denied")
    except OSError as exc:
        raise SnapshotIOError(f"output directory {path} is not writable: {exc}") from None
    return path
