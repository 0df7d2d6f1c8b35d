import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vbgk.diagnostics import (
    COLUMNS, AuxVariables, DiagnosticSeries, HydroSnapshot, InsufficientDataError, ProbeSchedule,
    TranslatedState, aux_variables, chapman_enskog_residual, conservative_vector, ddx, ddy,
    divergence_norm, gronwall_monitor, kinetic_from_aux, norm, ns_residual, pressure_error,
    seminorm_sq, tilde_energy, translate, untranslate,
)
from vbgk.kinetic import GridSpec, KineticField, equilibrium_init, flux_a1, maxwellians, moments
from vbgk.matrices import build
from vbgk.params import ModelParams
from vbgk.reference import taylor_green
from vbgk.solver import TimeStepPlan, plan_steps, run


def _random_field(grid, rng, params):
    w = np.stack([1.0 + 0.1 * rng.uniform(-1, 1, grid.shape),
                  0.05 * rng.uniform(-1, 1, grid.shape), 0.05 * rng.uniform(-1, 1, grid.shape)])
    return KineticField(grid, maxwellians(w, params) + 0.01 * rng.normal(size=(5, 3) + grid.shape))


def test_aux_examples(params, grid16, rng):
    data = rng.normal(size=(5, 3, 16, 16))
    data[2] = data[0]
    assert np.all(aux_variables(KineticField(grid16, data), params).m == 0.0)
    u0, _ = taylor_green(0.0, grid16, params.nu)
    fld = equilibrium_init(u0, params, grid16)
    aux = aux_variables(fld, params)
    np.testing.assert_allclose(aux.m, flux_a1(aux.w, params.rho_bar) / params.epsilon,
                               rtol=1e-12, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_kinetic_aux_round_trip(seed):
    p = ModelParams.from_a(0.1, epsilon=0.07, lam=30.0, nu=0.01)
    grid = GridSpec(8, 8)
    fld = _random_field(grid, np.random.default_rng(seed), p)
    back = kinetic_from_aux(untranslate(translate(aux_variables(fld, p), p), p), p)
    np.testing.assert_allclose(back.data, fld.data, rtol=0, atol=1e-12)


def test_conservative_vector_matches_C_times_U(params, grid16, rng):
    fld = _random_field(grid16, rng, params)
    big_w = conservative_vector(translate(aux_variables(fld, params), params), params)
    m = build(params)
    via_c = np.tensordot(m.C, fld.planes, axes=1)
    # translation removes w_bar from w and 2a w_bar from k and h
    e2, rb, a = params.epsilon ** 2, params.rho_bar, params.a
    via_c[0] -= rb
    via_c[9] -= e2 * 2 * a * rb
    via_c[12] -= e2 * 2 * a * rb
    np.testing.assert_allclose(big_w, via_c, rtol=0, atol=1e-12)


def test_energy_of_zero_state(params, grid16):
    zero = np.zeros((3, 16, 16))
    state = TranslatedState(grid16, zero, zero, zero, zero, zero)
    for s in (0, 1, 2):
        e = tilde_energy(state, build(params), s)
        assert (e.E_w, e.E_mxi, e.E_kh, e.D_mxi, e.D_kh, e.quadratic_form) == (0, 0, 0, 0, 0, 0)


def test_energy_of_constant_density_perturbation(params, grid16):
    c = 0.3
    zero = np.zeros((3, 16, 16))
    w_star = zero.copy()
    w_star[0] = c
    state = TranslatedState(grid16, w_star, zero, zero, zero, zero)
    m = build(params)
    with mpmath.workdps(40):
        inv = mpmath.matrix(m.Sigma.tolist()) ** -1
        w_tilde = float(inv[0, 0]) * c
    e = tilde_energy(state, m, 0)
    assert e.E_w == pytest.approx(w_tilde ** 2 * grid16.area, rel=1e-12)
    assert e.E_w == pytest.approx((c / (1 - 4 * params.a)) ** 2 * grid16.area, rel=1e-12)
    for s in (1, 2):
        assert tilde_energy(state, m, s).energy == 0.0


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.2, 0.05]), st.sampled_from([0, 1, 2]))
def test_energy_components_nonnegative_and_quadratic_form(seed, eps, s):
    p = ModelParams.from_a(0.1, epsilon=eps, lam=30.0, nu=0.01)
    grid = GridSpec(8, 8)
    fld = _random_field(grid, np.random.default_rng(seed), p)
    m = build(p)
    state = translate(aux_variables(fld, p), p)
    e = tilde_energy(state, m, s)
    assert min(e.E_w, e.E_mxi, e.E_kh, e.D_mxi, e.D_kh, e.quadratic_form) >= 0.0
    if s == 0:
        big_w = conservative_vector(state, p).reshape(15, -1)
        tilde = np.linalg.solve(m.Sigma, big_w)
        direct = float(np.einsum("in,ij,jn->", tilde, m.Sigma, tilde)) * grid.cell_area
        assert e.quadratic_form == pytest.approx(direct, rel=1e-10)


def test_energy_decays_on_rest_relaxing_run(params):
    grid = GridSpec(32, 32)
    fld = equilibrium_init(np.zeros((2, 32, 32)), params, grid)
    x, y = grid.centers()
    fld.data[0, 0] += 1e-3 * np.exp(np.cos(x) + np.cos(y))
    fld.data[0, 1] += 1e-3 * np.sin(x)
    plan = plan_steps(0.2, grid, params, splitting="strang")
    _, series = run(fld, plan, params, ProbeSchedule(every=1, residuals=False))
    energy = series.column("E_w") + series.column("E_mxi") + series.column("E_kh")
    assert np.all(np.diff(energy[1:]) <= 0.0)


def test_gronwall_errors_and_degenerate_case(params, grid16):
    series = DiagnosticSeries(params.epsilon, 0.0)
    with pytest.raises(InsufficientDataError):
        gronwall_monitor(series)
    fld = equilibrium_init(np.zeros((2, 16, 16)), params, grid16)
    plan = plan_steps(1.0, grid16, params)
    _, series = run(fld, TimeStepPlan(plan.dt, 1, 4), params, ProbeSchedule(every=1))
    report = gronwall_monitor(series)
    assert report.degenerate and "degenerate" in str(report)


def test_ns_residual_of_rest_state(params, grid16):
    rho = np.full(grid16.shape, params.rho_bar)
    snaps = [HydroSnapshot(t, rho, np.zeros((2,) + grid16.shape)) for t in (0.0, 0.1, 0.2, 0.3)]
    times, mass, mom = ns_residual(snaps, params, grid16)
    assert list(times) == [0.1, 0.2] and np.all(mass == 0.0) and np.all(mom == 0.0)
    with pytest.raises(InsufficientDataError):
        ns_residual(snaps[:2], params, grid16)


def test_chapman_enskog_examples(params, grid16):
    zero = np.zeros((3, 16, 16))
    assert chapman_enskog_residual(AuxVariables(grid16, zero, zero, zero, zero, zero), params) == 0.0
    u0, _ = taylor_green(0.0, grid16, params.nu)
    aux = aux_variables(equilibrium_init(u0, params, grid16), params)
    expected = norm(params.nu * ddx(aux.w, grid16), grid16) + norm(params.nu * ddy(aux.w, grid16), grid16)
    assert chapman_enskog_residual(aux, params) == pytest.approx(expected, rel=1e-9)


def test_divergence_and_pressure_examples():
    grid = GridSpec(128, 128)
    x, y = grid.centers()
    u = np.stack([np.sin(x), np.zeros_like(x)])
    assert divergence_norm(u, grid) == pytest.approx(math.sqrt(grid.area / 2), rel=1e-3)
    errors = []
    for n in (32, 64):
        g = GridSpec(n, n)
        errors.append(divergence_norm(taylor_green(0.3, g, 0.01)[0], g))
    assert max(errors) < 1e-12
    assert pressure_error(np.full(grid.shape, 3.0), np.full(grid.shape, -1.0), grid) == 0.0


def test_stencil_order_two():
    errs = []
    for n in (32, 64):
        g = GridSpec(n, n)
        x, _ = g.centers()
        errs.append(norm(ddx(np.sin(2 * x), g) - 2 * np.cos(2 * x), g))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)


def test_seminorm_of_constant_is_zero(grid16):
    f = np.full((3, 16, 16), 2.0)
    assert seminorm_sq(f, grid16, 0) == pytest.approx(12.0 * grid16.area)
    assert seminorm_sq(f, grid16, 1) == 0.0 and seminorm_sq(f, grid16, 2) == 0.0


def test_series_csv_and_ordering():
    series = DiagnosticSeries(0.1, 1.0)
    series.append({"step": 0, "t": 0.0, "mass": 1.0})
    with pytest.raises(ValueError):
        series.append({"step": 0, "t": 0.0})
    lines = series.to_csv().splitlines()
    assert lines[0] == ",".join(COLUMNS) and lines[1].startswith("0,0.0,1.0,nan")


def test_probe_schedule_rejects_zero():
    with pytest.raises(ValueError):
        ProbeSchedule(every=0)
