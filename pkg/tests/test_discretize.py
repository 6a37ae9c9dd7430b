import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdgen.discretize import (FORWARD_EULER, RK3_LOW_STORAGE, ConstantPool, Lowerer,
                              build_evaluations, build_residual_kernels, fuse_kernels,
                              get_scheme, ir, lower_derivative, pool_temporaries)
from fdgen.errors import CycleError, ScheduleError, UnassignedDerivativeError, UnknownFieldError
from fdgen.einstein import ExpansionContext, expand
from fdgen.expr import Derivative, Field, parse_equation
from fdgen.grid import create_grid
from fdgen.pipeline import compile_spec
from fdgen.runtime import Runtime, validate

from builders import expanded, make_spec, runtime


def ncomp_spec(formulas, eq="Eq(Der(rho, t), -Der(p, x0) - Der(T, x0))", ic=("rho = 1",),
               **kw):
    return make_spec([eq], list(ic), formulas=formulas, constants={"gama": 1.4}, **kw)


# ------------------------------------------------------------------ evaluations

def test_formulas_precede_their_consumers():
    spec = ncomp_spec(["B = 2*A", "A = rho*rho"], eq="Eq(Der(rho, t), -Der(B, x0))")
    eqs, forms = expanded(spec)
    order = [ev.target for ev in build_evaluations(eqs, forms, None, 2, ndim=1)]
    assert order.index("A") < order.index("B") < order.index("wk0")


def test_shared_derivative_is_computed_once():
    spec = make_spec(["Eq(Der(a, t), Der(f, x0))", "Eq(Der(b, t), 2*Der(f, x0))"],
                     ["a = 0", "b = 0"], formulas=["f = a*b"])
    eqs, forms = expanded(spec)
    evs = build_evaluations(eqs, forms, None, 2, ndim=1)
    assert sum(ev.kind == "derivative" for ev in evs) == 1


def test_circular_formulas():
    spec = ncomp_spec(["A = B + rho", "B = A*rho"], eq="Eq(Der(rho, t), -A)")
    eqs, forms = expanded(spec)
    with pytest.raises(CycleError, match="A -> B -> A|B -> A -> B"):
        build_evaluations(eqs, forms, None, 2, ndim=1)


def test_nested_derivative_widens_inner_range():
    spec = make_spec(["Eq(Der(f, t), Conservative(Der(f, x0)*f, x0))"], ["f = 0"], order=4)
    eqs, forms = expanded(spec)
    evs = build_evaluations(eqs, forms, None, 4, ndim=1)
    inner = next(ev for ev in evs if ev.expression == Derivative(Field("f"), 0))
    assert inner.widen == (2,) and evs.required_halo == (4,)


# ------------------------------------------------------------------ lowering

def expanded_rhs(text, constants=()):
    (eq,) = expand(parse_equation(f"Eq(Der(z, t), {text})", set(constants)), ExpansionContext(1))
    return eq.rhs


def test_first_derivative_lowering():
    pool = ConstantPool({"delta0": 0.1})
    node = lower_derivative(Derivative(Field("f"), 0), Lowerer(pool, 1), 2)
    assert node == ir.Bin("*", ir.Const("rc0"),
                          ir.Bin("-", ir.Load("f", (1,)), ir.Load("f", (-1,))))
    assert pool["rc0"] == 0.5 / 0.1


def test_second_derivative_lowering_keeps_centre_weight():
    pool = ConstantPool({"delta1": 0.5})
    node = lower_derivative(Derivative(Field("f"), 1, 2), Lowerer(pool, 2), 2)
    loads = sorted(n.offset for n in ir.walk(node) if isinstance(n, ir.Load))
    assert loads == [(0, -1), (0, 0), (0, 1)]
    assert sorted(pool.values[n] for n in pool.names if n.startswith("rc")) == [-8.0, 4.0]


def test_operand_is_evaluated_inline_at_each_point():
    pool = ConstantPool({"delta0": 1.0})
    e = Derivative(expanded_rhs("a*b"), 0)
    node = lower_derivative(e, Lowerer(pool, 1), 2)
    pair = node.b
    assert pair.a == ir.Bin("*", ir.Load("a", (1,)), ir.Load("b", (1,)))


def test_constants_fold_to_named_values():
    pool = ConstantPool({"gama": 1.4})
    node = Lowerer(pool, 1).lower(expanded_rhs("(gama - 1)*p", {"gama"}))
    assert isinstance(node, ir.Bin) and isinstance(node.a, ir.Const)
    assert math.isclose(pool[node.a.name], 0.4)


def test_unassigned_derivative_is_rejected():
    with pytest.raises(UnassignedDerivativeError):
        Lowerer(ConstantPool(), 1).lower(Derivative(Field("f"), 0))


def test_missing_spacing():
    with pytest.raises(UnknownFieldError):
        lower_derivative(Derivative(Field("f"), 0), Lowerer(ConstantPool(), 1), 2)


# ------------------------------------------------------------------ kernels

def _kernels(spec):
    eqs, forms = expanded(spec)
    grid = create_grid(1, spec.shape, spec.deltas, 1)
    pool = ConstantPool(spec.constant_values())
    evs = build_evaluations(eqs, forms, grid, 2)
    return eqs, evs, pool, grid


def test_independent_formulas_fuse():
    spec = ncomp_spec(["p = (gama - 1)*rho", "T = gama*rho"], eq="Eq(Der(rho, t), -p*T)")
    _, evs, pool, grid = _kernels(spec)
    fused = fuse_kernels(list(evs), pool, grid, 2)
    assert len(fused) == 1 and fused[0].outputs == {"p", "T"}


def test_dependent_formulas_stay_apart():
    spec = ncomp_spec(["p = (gama - 1)*rho", "T = gama*p"], eq="Eq(Der(rho, t), -T)")
    _, evs, pool, grid = _kernels(spec)
    assert len(fuse_kernels(list(evs), pool, grid, 2)) == 2


def test_single_evaluation_kernel():
    spec = ncomp_spec(["p = rho"], eq="Eq(Der(rho, t), -p)")
    _, evs, pool, grid = _kernels(spec)
    (k,) = fuse_kernels(list(evs), pool, grid, 2)
    assert k.name == "k_p"


def test_residual_kernel():
    spec = ncomp_spec(["p = rho", "T = rho"])
    eqs, evs, pool, grid = _kernels(spec)
    (k,) = build_residual_kernels(eqs, evs, pool, grid)
    (stmt,) = k.statements
    assert stmt.target == ir.Store("res_rho")
    assert stmt.value == ir.Bin("-", ir.Neg(ir.Load("wk0", (0,))), ir.Load("wk1", (0,)))


def test_zero_right_hand_side_writes_zero():
    spec = make_spec(["Eq(Der(f, t), 0)"], ["f = 0"])
    eqs, evs, pool, grid = _kernels(spec)
    (k,) = build_residual_kernels(eqs, evs, pool, grid)
    assert k.statements[0].value == ir.Num(0.0)


def test_temporary_pooling_reuses_dead_arrays():
    spec = make_spec(["Eq(Der(f, t), Der(f, x0))", "Eq(Der(g, t), Der(g, x0))"],
                     ["f = 0", "g = 0"])
    prog = compile_spec(spec)
    temps = {n for n in prog.arrays if n.startswith("tmp")}
    assert temps and not any(n.startswith("wk") for n in prog.arrays)
    _, mapping = pool_temporaries(prog.stage_kernels)
    assert mapping == {}


def test_schedule_validation_detects_reordering():
    prog = compile_spec(ncomp_spec(["p = (gama - 1)*rho", "T = gama*p"]))
    validate(prog)
    prog.spatial_kernels.reverse()
    with pytest.raises(ScheduleError):
        validate(prog)


TGV_SMALL = dict(
    equations=["Eq(Der(rho, t), -Skew(rho*u_j, x_j))",
               "Eq(Der(rhou_i, t), -Skew(rhou_i*u_j, x_j) - Der(p, x_i) + Der(tau_i_j, x_j))",
               "Eq(Der(rhoE, t), -Skew(rhoE*u_j, x_j) - Conservative(p*u_j, x_j) + Der(q_j, x_j)"
               " + Conservative(u_i*tau_i_j, x_j))"],
    substitutions=["Eq(tau_i_j, (Der(u_i, x_j) + Der(u_j, x_i)"
                   " - (2/3)*KroneckerDelta(i, j)*Der(u_k, x_k))/Re)",
                   "Eq(q_j, Der(T, x_j)/((gama - 1)*Minf**2*Pr*Re))"],
    formulas=["u_i = rhou_i/rho", "p = (gama - 1)*(rhoE - rho*u_j*u_j/2)",
              "T = gama*Minf**2*p/rho"],
    constants={"Re": 100.0, "Pr": 0.71, "Minf": 0.1, "gama": 1.4},
)


def tgv_spec(n=6, order=4, **kw):
    initial = ["rho = 1", "rhou_i = 0", "rhoE = 1"]
    return make_spec(TGV_SMALL["equations"], initial, ndim=3, shape=[n] * 3,
                     lengths=[2 * math.pi] * 3, formulas=TGV_SMALL["formulas"],
                     substitutions=TGV_SMALL["substitutions"], constants=TGV_SMALL["constants"],
                     order=order, **kw)


def _random_state(rt, seed):
    rng = np.random.default_rng(seed)
    rt.initialise()
    for name in rt.program.prognostics:
        base = 1.0 if name in ("rho", "rhoE") else 0.0
        rt.state.interior(name)[...] = base + 0.1 * rng.standard_normal(rt.grid.shape)


@pytest.mark.parametrize("seed", [0, 1])
def test_fusion_preserves_results_bitwise(seed):
    spec = tgv_spec(niter=2, dt=1e-3)
    out = []
    for fuse in (True, False):
        rt = Runtime(compile_spec(spec, fuse=fuse, diagnostics=False))
        _random_state(rt, seed)
        rt.run()
        out.append({n: rt.state.interior(n).copy() for n in rt.program.prognostics})
    assert len(compile_spec(spec).stage_kernels) < len(compile_spec(spec, fuse=False).stage_kernels)
    for n in out[0]:
        assert np.array_equal(out[0][n], out[1][n])


# ------------------------------------------------------------------ time integration

def test_scheme_tables():
    assert get_scheme("rk3") is RK3_LOW_STORAGE and get_scheme("Euler") is FORWARD_EULER
    with pytest.raises(ValueError):
        get_scheme("rk4")
    assert sum(RK3_LOW_STORAGE.B) != 1  # 2N-storage weights are not quadrature weights


def test_euler_single_step_kernel():
    rt = runtime(make_spec(["Eq(Der(f, t), 2)"], ["f = 1"], temporal="Euler", dt=0.1))
    rt.run()
    assert np.all(rt.state.interior("f") == 1.2)


def test_rk3_fixed_point():
    rt = runtime(make_spec(["Eq(Der(f, t), 0*f)"], ["f = sin(2*pi*x0)"], niter=5))
    rt.initialise()
    before = rt.state.interior("f").copy()
    rt.run()
    assert np.array_equal(rt.state.interior("f"), before)


def test_rk3_linear_step_is_cubic_taylor():
    h = 0.1
    y = RK3_LOW_STORAGE.integrate(lambda t, y: y, 1.0, h, 1)
    assert y == pytest.approx(1 + h + h * h / 2 + h ** 3 / 6, abs=1e-15)


def test_runtime_matches_scalar_integrator():
    spec = make_spec(["Eq(Der(f, t), cos(t) - f)"], ["f = 1"], dt=0.05, niter=20)
    rt = runtime(spec)
    rt.run()
    ref = RK3_LOW_STORAGE.integrate(lambda t, y: math.cos(t) - y, 1.0, 0.05, 20)
    assert np.all(rt.state.interior("f") == ref)


def _order(scheme, f, exact, t_end=1.0):
    steps = [10, 20, 40, 80]
    err = [abs(scheme.integrate(f, 0.0, t_end / n, n) - exact) for n in steps]
    return np.polyfit(np.log([t_end / n for n in steps]), np.log(err), 1)[0]


@pytest.mark.parametrize("scheme,expected", [(RK3_LOW_STORAGE, 3), (FORWARD_EULER, 1)])
def test_temporal_order(scheme, expected):
    # non-autonomous: exercises the stage times as well as the weights
    slope = _order(scheme, lambda t, y: math.cos(t) - y + math.sin(t), math.sin(1.0))
    assert abs(slope - expected) <= 0.1


@given(st.floats(-2, 2), st.floats(1e-3, 0.2))
def test_rk3_is_exact_for_quadratics_in_time(a, h):
    # y' = 2 a t integrates exactly for a third-order method
    y = RK3_LOW_STORAGE.integrate(lambda t, y: 2 * a * t, 0.0, h, 5)
    assert y == pytest.approx(a * (5 * h) ** 2, abs=1e-12)
