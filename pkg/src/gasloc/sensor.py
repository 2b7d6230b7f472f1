"""MOX gas sensor simulation.

Forward model (reverse modeling of the physical sensor): gas concentration
-> surface resistance through a log-log power law -> output voltage of a
voltage divider, followed by first-order response/recovery dynamics and
additive noise.  The inverse (``calibrate``) recovers concentration from a
settled output voltage and is the exact algebraic inverse of the forward
nonlinearity.

The power-law exponent ``k`` is negative for reducing gases, which makes
the settled output voltage strictly increasing in concentration.  The
rank-based feature relies on exactly this positive monotonic relationship.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .world import ValidationError


@dataclass(frozen=True)
class SensorParams:
    """Static parameters of one simulated MOX sensor unit."""

    k: float = -1.58            # power-law exponent (datasheet fit, ethanol)
    b: float = 0.17             # power-law intercept
    R0: float = 100.0           # baseline resistance in clean air, kOhm
    RL: float = 47.0            # load resistance, kOhm
    VT: float = 5.0             # supply voltage, V
    sigma_b: float = 0.01       # background noise std, V
    sigma_k: float = 0.02       # proportional noise coefficient
    tau_res: float = 2.04       # response time constant, s
    tau_rec: float = 4.57       # recovery time constant, s
    sample_rate: float = 10.0   # Hz
    conc_floor: float = 1e-9    # floor applied before the power law
    conc_max: float = 1e9       # saturation clamp for calibrate()

    def __post_init__(self):
        for name in ("R0", "RL", "VT", "tau_res", "tau_rec", "sample_rate",
                     "conc_floor", "conc_max"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"sensor parameter {name} must be > 0")
        if self.sigma_b < 0 or self.sigma_k < 0:
            raise ValidationError("sigma_b and sigma_k must be >= 0")
        if self.k == 0:
            raise ValidationError("sensor parameter k must be nonzero")
        if self.k > 0:
            # keeps settled voltage strictly increasing in concentration
            raise ValidationError("sensor parameter k must be negative (reducing-gas response)")

    @property
    def v_clean(self) -> float:
        """Settled output voltage in clean air (floor concentration)."""
        return concentration_to_voltage(self, self.conc_floor)


SENSOR_PRESETS = {
    # factory-variation extremes of the baseline resistance
    "sensor_I": {"R0": 100.0},
    "sensor_II": {"R0": 1500.0},
}


def sensor_preset(name: str, **overrides) -> SensorParams:
    """Named sensor variant; extra keyword arguments override fields."""
    if name not in SENSOR_PRESETS:
        raise ValidationError(f"unknown sensor preset {name!r}; known: {sorted(SENSOR_PRESETS)}")
    return replace(SensorParams(), **{**SENSOR_PRESETS[name], **overrides})


@dataclass
class SensorState:
    """Mutable per-trial sensor state: filter reading and RNG stream."""

    reading: float
    rng: np.random.Generator
    time: float = 0.0

    @classmethod
    def initial(cls, params: SensorParams, rng: np.random.Generator) -> "SensorState":
        return cls(reading=params.v_clean, rng=rng)


def concentration_to_voltage(params: SensorParams, g_con) -> np.ndarray | float:
    """Instantaneous output voltage for a true gas concentration.

    Rs = R0 * (g/10^b)^(1/k); V = RL*VT / (RL + Rs).  Concentrations are
    floored at ``conc_floor`` so the power law stays defined at zero.
    Result lies in (0, VT).
    """
    g = np.maximum(np.asarray(g_con, dtype=float), params.conc_floor)
    rs = params.R0 * (g / 10.0 ** params.b) ** (1.0 / params.k)
    v = params.RL * params.VT / (params.RL + rs)
    if np.ndim(g_con) == 0:
        return float(v)
    return v


def calibrate(params: SensorParams, v_out) -> np.ndarray | float:
    """Concentration recovered from output voltage: 10^b ((RL*VT - RL*v)/(R0*v))^k.

    Defined on 0 < v < VT; the result is clamped to ``conc_max`` (the
    sensor saturates as v approaches VT).
    """
    v = np.asarray(v_out, dtype=float)
    if np.any(v <= 0.0) or np.any(v >= params.VT):
        raise ValidationError(f"v_out must lie strictly inside (0, {params.VT})")
    g = 10.0 ** params.b * ((params.RL * params.VT - params.RL * v) / (params.R0 * v)) ** params.k
    g = np.minimum(g, params.conc_max)
    if np.ndim(v_out) == 0:
        return float(g)
    return g


def step_dynamics(state: SensorState, params: SensorParams, target: float, dt: float) -> float:
    """Advance the first-order filter one step toward ``target`` volts.

    Uses tau_res when the reading rises and tau_rec when it falls.
    Mutates and returns ``state.reading``.
    """
    if not 0.0 < dt <= 1.0 / params.sample_rate:
        raise ValidationError(f"dt must be in (0, 1/sample_rate]; got {dt}")
    tau = params.tau_res if target > state.reading else params.tau_rec
    state.reading += (dt / tau) * (target - state.reading)
    state.reading = float(min(max(state.reading, 0.0), params.VT))
    state.time += dt
    return state.reading


def add_noise(state: SensorState, params: SensorParams, v: float) -> float:
    """v plus Gaussian noise with std sigma_b + sigma_k*|v|, clamped to [0, VT]."""
    sigma = params.sigma_b + params.sigma_k * abs(v)
    if sigma == 0.0:
        return float(v)
    noisy = v + sigma * state.rng.standard_normal()
    return float(min(max(noisy, 0.0), params.VT))


def sample(state: SensorState, params: SensorParams, true_concentration: float,
           dt: float, calibrated: bool) -> float:
    """One gas measurement d_i: nonlinearity -> dynamics -> noise [-> calibration].

    Returns the noisy dynamic voltage when ``calibrated`` is false, else
    the calibration function applied to it.  Noise clamping can park the
    voltage on the closed boundary of [0, VT]; it is nudged back inside
    the open interval before calibration.
    """
    target = concentration_to_voltage(params, true_concentration)
    v = step_dynamics(state, params, target, dt)
    v = add_noise(state, params, v)
    if not calibrated:
        return v
    eps = 1e-12 * params.VT
    v = min(max(v, eps), params.VT - eps)
    return calibrate(params, v)
