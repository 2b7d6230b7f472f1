"""Sensor nonlinearity, inverse calibration, dynamics, and noise."""

import numpy as np
import pytest

from gasloc.sensor import (
    SensorParams,
    SensorState,
    ValidationError,
    add_noise,
    calibrate,
    concentration_to_voltage,
    sample,
    sensor_preset,
    step_dynamics,
)


def test_presets_differ_only_in_baseline_resistance():
    s1 = sensor_preset("sensor_I")
    s2 = sensor_preset("sensor_II")
    assert s1.R0 == 100.0 and s2.R0 == 1500.0
    assert (s1.k, s1.b) == (s2.k, s2.b) == (-1.58, 0.17)
    with pytest.raises(ValidationError):
        sensor_preset("sensor_III")


def test_voltage_is_strictly_increasing_in_concentration():
    params = SensorParams()
    g = np.logspace(-6, 6, 400)
    v = concentration_to_voltage(params, g)
    assert np.all(np.diff(v) > 0)
    assert np.all((v > 0) & (v < params.VT))


@pytest.mark.parametrize("preset", ["sensor_I", "sensor_II"])
def test_calibration_round_trip(preset):
    params = sensor_preset(preset)
    g = np.logspace(-4, 4, 1000)
    recovered = calibrate(params, concentration_to_voltage(params, g))
    assert np.max(np.abs(recovered - g) / g) < 1e-9


def test_calibrate_rejects_out_of_range_voltage():
    params = SensorParams()
    for v in (0.0, -0.1, params.VT, params.VT + 1.0):
        with pytest.raises(ValidationError):
            calibrate(params, v)


def test_step_response_time_constant():
    # Response: clean air -> step to high gas.  With dt = 0.01 s the filter
    # takes an integer number of steps to reach t = tau exactly.
    params = SensorParams(sigma_b=0.0, sigma_k=0.0)
    rng = np.random.default_rng(0)
    state = SensorState.initial(params, rng)
    v0 = state.reading
    target = concentration_to_voltage(params, 100.0)
    dt = 0.01
    n = round(params.tau_res / dt)
    for _ in range(n):
        step_dynamics(state, params, target, dt)
    frac = (state.reading - v0) / (target - v0)
    assert abs(frac - 0.632) < 0.01


def test_recovery_time_constant():
    # Recovery: settled at high gas -> step back to clean air.
    params = SensorParams(sigma_b=0.0, sigma_k=0.0)
    rng = np.random.default_rng(0)
    state = SensorState.initial(params, rng)
    high = concentration_to_voltage(params, 100.0)
    state.reading = high
    target = params.v_clean
    dt = 0.01
    n = round(params.tau_rec / dt)
    for _ in range(n):
        step_dynamics(state, params, target, dt)
    frac = (state.reading - target) / (high - target)
    assert abs(frac - 0.368) < 0.01


def test_rising_and_falling_use_different_time_constants():
    params = SensorParams()
    rng = np.random.default_rng(0)
    up = SensorState(reading=1.0, rng=rng)
    down = SensorState(reading=3.0, rng=rng)
    step_dynamics(up, params, 2.0, 0.1)
    step_dynamics(down, params, 2.0, 0.1)
    rise = up.reading - 1.0
    fall = 3.0 - down.reading
    assert rise / fall == pytest.approx(params.tau_rec / params.tau_res)


def test_step_dynamics_rejects_bad_dt():
    params = SensorParams()
    state = SensorState.initial(params, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        step_dynamics(state, params, 1.0, 0.0)
    with pytest.raises(ValidationError):
        step_dynamics(state, params, 1.0, 0.2)  # above 1/sample_rate


@pytest.mark.parametrize("v", [1.0, 2.5, 4.0])
def test_noise_std_matches_model(v):
    params = SensorParams()
    state = SensorState(reading=v, rng=np.random.default_rng(1234))
    draws = np.array([add_noise(state, params, v) for _ in range(10_000)])
    expected = params.sigma_b + params.sigma_k * abs(v)
    assert abs(draws.std(ddof=1) - expected) / expected < 0.05
    assert abs(draws.mean() - v) < 5.0 * expected / np.sqrt(10_000)


def test_noise_free_sensor_returns_exact_voltage():
    params = SensorParams(sigma_b=0.0, sigma_k=0.0)
    state = SensorState(reading=2.0, rng=np.random.default_rng(0))
    assert add_noise(state, params, 2.0) == 2.0


def test_sample_calibrated_settles_to_true_concentration():
    # With zero noise and many settled steps the calibrated reading
    # converges to the true concentration.
    params = SensorParams(sigma_b=0.0, sigma_k=0.0)
    state = SensorState.initial(params, np.random.default_rng(0))
    g_true = 7.3
    for _ in range(3000):
        out = sample(state, params, g_true, 0.1, calibrated=True)
    assert out == pytest.approx(g_true, rel=1e-6)


def test_sample_uncalibrated_returns_voltage():
    params = SensorParams(sigma_b=0.0, sigma_k=0.0)
    state = SensorState.initial(params, np.random.default_rng(0))
    out = sample(state, params, 5.0, 0.1, calibrated=False)
    assert 0.0 < out < params.VT


def test_params_validation():
    with pytest.raises(ValidationError):
        SensorParams(k=1.58)  # increasing resistance law is not supported
    with pytest.raises(ValidationError):
        SensorParams(R0=0.0)
    with pytest.raises(ValidationError):
        SensorParams(sigma_b=-0.01)
