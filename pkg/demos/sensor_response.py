"""Walk through the metal-oxide sensor model: static curve, calibration,
first-order dynamics, and the voltage-dependent noise floor.

Run:  python3 demos/sensor_response.py
"""

import numpy as np

from gasloc.sensor import (
    SensorParams,
    SensorState,
    calibrate,
    concentration_to_voltage,
    sample,
    sensor_preset,
    step_dynamics,
)

# --- static response curve ---------------------------------------------------
# Two factory presets share the power-law shape but differ in base resistance,
# so the same concentration lands on very different output voltages.

g = np.logspace(-2, 3, 6)
print("concentration -> voltage (V), per preset")
print(f"{'g':>10}  {'sensor_I':>9}  {'sensor_II':>9}")
for gi in g:
    v1 = concentration_to_voltage(sensor_preset("sensor_I"), gi)
    v2 = concentration_to_voltage(sensor_preset("sensor_II"), gi)
    print(f"{gi:10.2f}  {v1:9.4f}  {v2:9.4f}")

# The curve is strictly monotone, so with the right parameter sheet it can be
# inverted exactly. That inversion is what "calibrated" means in this package.
params = sensor_preset("sensor_II")
v = concentration_to_voltage(params, 42.0)
print(f"\ncalibrate(sensor_II, {v:.4f} V) = {calibrate(params, v):.6f} (true 42)")

# --- first-order dynamics ----------------------------------------------------
# The surface reaction is slow: the reading chases the instantaneous voltage
# with different rise and decay time constants. Expose the sensor to a gas
# pocket for a few seconds, then clean air, and watch the lag.

params = SensorParams(sigma_b=0.0, sigma_k=0.0)  # noise off to see the filter
state = SensorState.initial(params, np.random.default_rng(0))
dt = 0.05
target_v = concentration_to_voltage(params, 100.0)

print("\ntime (s)  reading (V)   [exposure 0-6 s, clean air afterwards]")
for i in range(240):
    inside_pocket = i * dt < 6.0
    v_now = target_v if inside_pocket else params.v_clean
    step_dynamics(state, params, v_now, dt)
    if (i + 1) % 24 == 0:
        print(f"{(i + 1) * dt:7.2f}  {state.reading:10.4f}")
print(f"asymptote would be {target_v:.4f} V; clean air is {params.v_clean:.4f} V")
print(f"rise tau {params.tau_res} s is shorter than decay tau {params.tau_rec} s,")
print("so pockets register quickly but linger in the reading")

# --- noise -------------------------------------------------------------------
# Measurement noise grows with the signal: sigma(v) = sigma_b + sigma_k * |v|.
# sample() composes nonlinearity + dynamics + noise; hold the input constant
# at a reading the filter has already settled on, and with a tiny dt the
# spread of repeated raw readings is the noise model alone.

params = SensorParams()
for level in (0.5, 4.0):
    state = SensorState(reading=level, rng=np.random.default_rng(7))
    g_level = calibrate(params, level)
    draws = [sample(state, params, g_level, dt=1e-9, calibrated=False)
             for _ in range(4000)]
    print(f"\nv = {level:.1f} V: empirical std {np.std(draws):.4f}, "
          f"model {params.sigma_b + params.sigma_k * level:.4f}")
