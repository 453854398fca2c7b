import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_imex.experiments import (
    PRESETS,
    ErrorRow,
    ExperimentError,
    ExperimentPreset,
    bimaxwellian,
    convergence_study,
    fit_order,
    fit_slope,
    get_preset,
    initial_state,
    make_problem,
    solution_error,
)
from kinetic_imex.kinetic import VelocityGrid, moment_array


@settings(max_examples=40)
@given(st.floats(0.5, 6), st.floats(1e-3, 1e3), st.floats(1e-4, 1e-1))
def test_fit_slope_recovers_power_law(p, C, dt0):
    dts = dt0 / np.array([1, 2, 4, 8])
    slope, res = fit_slope(dts, C * dts**p)
    assert slope == pytest.approx(p, abs=1e-9) and res < 1e-9


def test_fit_slope_needs_two_steps():
    with pytest.raises(ExperimentError):
        fit_slope([0.1], [1.0])
    with pytest.raises(ExperimentError):
        fit_slope([0.1, 0.1], [1.0, 2.0])


def test_fit_order_groups_and_excludes():
    rows = [ErrorRow("A", 0.1, dt, 3 * dt**2) for dt in (0.1, 0.05, 0.025)]
    rows += [ErrorRow("A", 0.01, 0.1, 2.0), ErrorRow("A", 0.01, 0.05, math.inf, "diverged"),
             ErrorRow("A", 0.01, 0.025, 0.125)]
    rows += [ErrorRow("B", 0.1, 0.1, math.inf, "diverged"), ErrorRow("B", 0.1, 0.05, 1.0)]
    fits = {(f.scheme, f.epsilon): f for f in fit_order(rows)}
    assert fits["A", 0.1].slope == pytest.approx(2) and fits["A", 0.1].n_points == 3
    assert fits["A", 0.01].slope == pytest.approx(2) and fits["A", 0.01].excluded == [0.05]
    assert math.isnan(fits["B", 0.1].slope)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_ladder_runs_end_at_the_same_time(name):
    p = get_preset(name)
    ends = [dt * n for dt, n in p.ladder_dts()]
    dt_ref, n_ref = p.reference_dt()
    assert np.allclose(ends, dt_ref * n_ref, rtol=1e-12)
    assert dt_ref <= min(dt for dt, _ in p.ladder_dts()) / p.ref_factor * (1 + 1e-12)


def test_desk_preset_defaults():
    p = get_preset("bgk-nonhomogeneous-desk")
    assert (p.nx, p.nv, p.v_max) == (64, 64, 8.0)
    assert p.base_dt == pytest.approx(1 / 64 / 32)
    assert [n for _, n in p.ladder_dts()] == [p.base_steps * d for d in (2, 4, 8)]
    q = get_preset("bgk-nonhomogeneous-desk", nx=32)
    assert q.nx == 32 and p.nx == 64


@pytest.mark.parametrize("kw", [dict(init="shock"), dict(model="boltzmann", dv=1), dict(ladder=(0,)),
                                dict(ladder=(1.5,)), dict(ref_factor=0), dict(eps=(0.1, -1.0)),
                                dict(t_final=0.0), dict(schemes=("IMEX-RK4",)), dict(mu="rho^2")])
def test_preset_validation(kw):
    with pytest.raises((ExperimentError, ValueError)):
        ExperimentPreset("bad", **kw)


def test_unknown_preset():
    with pytest.raises(ExperimentError, match="known"):
        get_preset("nope")


def test_bimaxwellian_moments():
    g = VelocityGrid(2, 64, 12.0)
    m = moment_array(bimaxwellian(g)[None], g)[0]
    # centres (1, 1) and (-3, 1): mean velocity (-1, 1)
    assert m[0] == pytest.approx(1, abs=1e-12)
    assert m[1:3] == pytest.approx([-1, 1], abs=1e-12)
    with pytest.raises(ExperimentError):
        bimaxwellian(VelocityGrid(1, 8, 4.0))


def test_tiny_study_and_error_norms():
    p = get_preset("bgk-nonhomogeneous-desk", nx=16, nv=16, t_final=0.02, ladder=(1, 2), ref_factor=4)
    pb = make_problem(p, 0.1)
    f0 = initial_state(p, pb)
    assert solution_error(f0, f0, pb) == 0
    rows = convergence_study(p, ["IMEX-BDF2"], [0.1])
    assert [r.dt for r in rows] == [dt for dt, _ in p.ladder_dts()]
    assert all(np.isfinite(r.error) and r.error > 0 and r.flag == "" for r in rows)
    assert rows[0].error > rows[1].error
    with pytest.raises(Exception):
        convergence_study(p, ["IMEX-XYZ"], [0.1])
