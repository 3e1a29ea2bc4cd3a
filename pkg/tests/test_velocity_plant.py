"""Velocity plant tests: forces, constraints, lag dynamics, steady states."""

import numpy as np
import pytest
from scipy.optimize import brentq

from fluidswarm import (PlantParams, PlantState, constrain_accel,
                        desired_accel, drag_force, plant_step, tilt_angle_deg)
from fluidswarm.plant_suite import (headwind_sweep, hover_hold,
                                    max_speed_sweep, noise_monte_carlo,
                                    run_suite, step_response)

P = PlantParams()


def test_drag_force_hand_value():
    # x axis: 0.5 * 1.225 * 1.0 * 0.02 * 4^2 = 0.196 N, opposing motion
    f = drag_force([4.0, 0.0, 0.0], P)
    assert np.allclose(f, [-0.196, 0.0, 0.0], atol=1e-12)
    assert np.allclose(drag_force([-4.0, 0.0, 0.0], P), [0.196, 0.0, 0.0])
    # z axis uses its own coefficient/area pair: 0.5 * 1.225 * 1.2 * 0.03
    fz = drag_force([0.0, 0.0, 2.0], P)
    assert fz[2] == pytest.approx(-0.5 * 1.225 * 1.2 * 0.03 * 4.0, rel=1e-12)


def test_desired_accel_shaping():
    a = desired_accel([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], P)
    assert np.allclose(a, [2.0, 0.0, -9.81])  # (cmd-v)/tau_v, gravity comp
    windy = PlantParams(ff_gain=0.8)
    aw = desired_accel([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-4.0, 0.0, 0.0], windy)
    # feedforward cancels the drag expected at (cmd - wind) = 4 m/s airspeed
    assert aw[0, 0] == pytest.approx(0.8 * 0.196, rel=1e-12)


def test_constrain_accel_respects_both_limits():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 30.0, (500, 3))
    c = constrain_accel(a, P)
    tilt = tilt_angle_deg(c)
    assert np.all(tilt <= P.tilt_max_deg + 1e-9)
    assert np.all(np.linalg.norm(c, axis=1) <= P.a_max + 1e-9)
    # demands already inside both limits pass through untouched
    mild = np.array([[1.0, 0.5, -9.81]])
    assert np.allclose(constrain_accel(mild, P), mild)


def test_constrain_accel_magnitude_clip_preserves_direction():
    a = np.array([10.0, 0.0, -40.0])
    c = constrain_accel(a, P)
    assert np.linalg.norm(c) == pytest.approx(P.a_max, rel=1e-12)
    assert np.allclose(c / np.linalg.norm(c), a / np.linalg.norm(a), rtol=1e-12)


def test_tilt_angle():
    assert tilt_angle_deg([1.0, 0.0, -1.0]) == pytest.approx(45.0)
    assert tilt_angle_deg([0.0, 0.0, -9.81]) == pytest.approx(0.0)


def test_hover_is_a_fixed_point():
    state = PlantState.hover(P)
    for _ in range(100):
        state = plant_step(state, [0.0, 0.0, 0.0], 0.05, P)
    assert np.all(np.abs(state.velocity) <= 1e-12)
    assert np.allclose(state.thrust_accel, [0.0, 0.0, -P.gravity])


def test_single_substep_is_an_exact_exponential_lag():
    """One substep must follow a = a_d + (a - a_d) e^(-h/tau) exactly."""
    dt = P.tau_thrust / 4.0  # exactly one substep
    v0 = np.array([[0.5, -0.2, 0.1]])
    a0 = np.array([[1.0, 0.0, -9.81]])
    cmd = np.array([2.0, 0.0, 0.0])
    nxt = plant_step(PlantState(v0.copy(), a0.copy()), cmd, dt, P)
    a_d = constrain_accel(desired_accel(v0, cmd, np.zeros(3), P), P)
    want_a = a_d + (a0 - a_d) * np.exp(-dt / P.tau_thrust)
    assert np.allclose(nxt.thrust_accel, want_a, rtol=1e-12, atol=1e-12)
    want_v = v0 + dt * (want_a + [0.0, 0.0, P.gravity] + drag_force(v0, P) / P.mass)
    assert np.allclose(nxt.velocity, want_v, rtol=1e-12, atol=1e-12)


def test_substeps_keep_pace_with_the_thrust_lag():
    from fluidswarm.velocity_plant import substep_count
    assert substep_count(0.02, P) == 1
    assert substep_count(0.05, P) == 3  # ceil(0.05 / 0.02)
    assert substep_count(1.0, P) == 50


def test_steady_speed_matches_force_balance():
    """Terminal speed under a constant command solves (c-v)/tau = k v^2 / m."""
    cmd = 8.0
    k = float(P.drag_factor[0])
    want = brentq(lambda v: (cmd - v) / P.tau_v - k * v * v / P.mass, 0.0, cmd)
    state = PlantState.hover(P)
    for _ in range(int(30.0 / 0.005)):
        state = plant_step(state, [cmd, 0.0, 0.0], 0.005, P)
    got = float(state.velocity[0, 0])
    assert got == pytest.approx(want, rel=1e-3)
    assert got < cmd  # drag always costs something


def test_plant_stays_bounded_under_wild_commands():
    rng = np.random.default_rng(4)
    state = PlantState.hover(P)
    for _ in range(2000):
        cmd = rng.uniform(-30.0, 30.0, 3)
        state = plant_step(state, cmd, 0.05, P)
        assert np.all(np.isfinite(state.velocity))
    assert np.linalg.norm(state.velocity) < 60.0


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        plant_step(PlantState.hover(P), [1.0, 0.0, 0.0], 0.0, P)


def test_params_validation():
    with pytest.raises(ValueError):
        PlantParams(mass=0.0)
    with pytest.raises(ValueError):
        PlantParams(tilt_max_deg=95.0)
    with pytest.raises(ValueError):
        PlantParams(thrust_to_weight=-1.0)


# ----------------------------------------------------------------------
# scenario battery
# ----------------------------------------------------------------------

def test_hover_hold_scenario():
    out = hover_hold(P)
    assert out["drift_error"] < 1e-3


def test_step_response_band():
    out = step_response(P)
    assert 1.32 <= out["settling_time_s"] <= 2.02
    assert out["overshoot_pct"] < 0.5
    assert 1.32 <= out["settling_time_diag_s"] <= 2.02
    assert out["overshoot_diag_pct"] < 0.5


def test_max_speed_is_insensitive_to_thrust_to_weight():
    out = max_speed_sweep(P, tw_values=(1.5, 6.0))
    speeds = [r["steady_speed"] for r in out["rows"]]
    # drag, not thrust, limits level speed
    assert max(speeds) - min(speeds) < 0.05
    for r in out["rows"]:
        assert 6.98 <= r["steady_speed"] <= 7.98
        assert 53.3 <= r["peak_tilt_deg"] <= 55.3


def test_headwind_errors_grow_with_wind():
    out = headwind_sweep(P, wind_speeds=(0.0, 4.0, 8.0))
    errs = [r["steady_error"] for r in out["rows"]]
    assert errs[0] == pytest.approx(0.0, abs=1e-9)
    assert errs == sorted(errs)
    assert out["max_error"] <= 0.12


def test_noise_rmse_is_monotone():
    out = noise_monte_carlo(P, noise_levels=(0.5, 1.5, 3.0), runs=2,
                            duration=5.0)
    lat = [r["lateral_rmse"] for r in out["rows"]]
    assert lat == sorted(lat)


def test_run_suite_scenario_selection():
    out = run_suite(P, scenarios=("hover",))
    assert set(out) == {"hover_hold", "pass"}
    assert out["pass"]
