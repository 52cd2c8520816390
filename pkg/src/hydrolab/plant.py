"""Tank, proportional valve, load vanes, and pressure transmitter models.

The tank is the classic single-capacity level process: a vertical vessel
whose level h obeys C*dh/dt = q_in - q_out.  Two outflow laws are offered:
the linearized resistance law q_out = h/R that yields the first-order
transfer function H(s)/Qi(s) = R/(RCs+1), and the gravity-drain Torricelli
law q_out = k*sqrt(h) for studying linearization error.  The inlet valve is
a slew-limited proportional vane commanded in volts; the transmitter maps
hydrostatic pressure to a 4-20 mA loop signal.

All step functions are pure: they take value-type state and return new
state, so they are safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum


class OutflowModel(str, Enum):
    LINEAR_RESISTANCE = "linear"
    TORRICELLI = "torricelli"


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class TankConfig:
    """Physical tank parameters.

    capacitance_C drives the level ODE; area_A is geometric metadata only
    (the rig's spec sheet quotes a capacitance that disagrees with the
    vessel diameter, and the time constant R*C is what the control
    behaviour hangs on).
    """

    capacitance_C: float = 0.5063  # m^3 per m of level
    resistance_R: float = 2000.0  # s/m^2
    area_A: float = 0.5063  # m^2, metadata, not used by the ODE
    h_max: float = 1.0  # m, usable tank height
    q_in_max: float = 5.0e-4  # m^3/s with the inlet valve fully open
    outflow_model: OutflowModel = OutflowModel.LINEAR_RESISTANCE
    # m^2.5/s; defaults to matching the linear law at the h = 0.5 m
    # operating point: k*sqrt(0.5) == 0.5/R
    torricelli_coeff: float | None = None

    def __post_init__(self) -> None:
        for name in ("capacitance_C", "resistance_R", "h_max", "q_in_max"):
            value = getattr(self, name)
            _require_finite(name, value)
            if value <= 0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        if self.area_A <= 0:
            raise ValueError(f"area_A must be > 0, got {self.area_A!r}")
        if self.torricelli_coeff is None:
            object.__setattr__(
                self, "torricelli_coeff", math.sqrt(0.5) / self.resistance_R
            )
        elif self.torricelli_coeff <= 0:
            raise ValueError("torricelli_coeff must be > 0")

    def outflow_at(self, level_m: float, load_fraction: float = 1.0) -> float:
        """Outflow through the load vane at a given level."""
        h = max(level_m, 0.0)
        if self.outflow_model is OutflowModel.TORRICELLI:
            return load_fraction * self.torricelli_coeff * math.sqrt(h)
        return load_fraction * h / self.resistance_R


@dataclass(frozen=True)
class ValveConfig:
    """Proportional inlet vane: 0-10 V command, full stroke in 25 s."""

    travel_time_s: float = 25.0
    v_min: float = 0.0
    v_max: float = 10.0

    def __post_init__(self) -> None:
        _require_finite("travel_time_s", self.travel_time_s)
        if self.travel_time_s < 0:
            raise ValueError("travel_time_s must be >= 0")
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be < v_max")


@dataclass(frozen=True)
class SensorConfig:
    """Differential-pressure level transmitter, 0-6.6 kPa onto 4-20 mA."""

    p_span_pa: float = 6600.0
    i_min_ma: float = 4.0
    i_max_ma: float = 20.0
    rho: float = 998.2  # kg/m^3
    g: float = 9.8  # m/s^2

    def __post_init__(self) -> None:
        if self.p_span_pa <= 0:
            raise ValueError("p_span_pa must be > 0")
        if not self.i_min_ma < self.i_max_ma:
            raise ValueError("i_min_ma must be < i_max_ma")
        if self.rho <= 0 or self.g <= 0:
            raise ValueError("rho and g must be > 0")

    @property
    def h_span_m(self) -> float:
        """Level corresponding to full-scale pressure (100% of span)."""
        return self.p_span_pa / (self.rho * self.g)


@dataclass(frozen=True)
class PlantState:
    """One instant of the simulated rig.

    v_in/v_out accumulate the inflow and outflow volume with the same
    quadrature the level integrator uses, so mass balance
    C*(h - h0) == (v_in - v_out) holds to roundoff on non-saturating runs.
    The overflow/underflow flags are sticky once the level has clamped at a
    tank bound.
    """

    t: float = 0.0
    h: float = 0.0
    valve_opening: float = 0.0
    q_in: float = 0.0
    q_out: float = 0.0
    v_in: float = 0.0
    v_out: float = 0.0
    overflowed: bool = False
    underflowed: bool = False


@dataclass(frozen=True)
class LinearizedModel:
    """First-order small-signal model K/(tau*s + 1)."""

    gain_K: float
    tau: float

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be > 0")


def linearized_model(config: TankConfig, output: str = "level") -> LinearizedModel:
    """Linearized transfer function of the tank.

    output="level" gives H(s)/Qi(s) = R/(RCs+1); output="outflow" gives the
    unity-DC-gain Qo(s)/Qi(s) = 1/(RCs+1).
    """
    tau = config.resistance_R * config.capacitance_C
    if output == "level":
        return LinearizedModel(gain_K=config.resistance_R, tau=tau)
    if output == "outflow":
        return LinearizedModel(gain_K=1.0, tau=tau)
    raise ValueError(f"output must be 'level' or 'outflow', got {output!r}")


def analytic_step_response(
    model: LinearizedModel, step_amplitude: float, t: float
) -> float:
    """Closed-form K*u0*(1 - exp(-t/tau)) response to an inflow step.

    Serves as the validation oracle for the numerical integrator.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return model.gain_K * step_amplitude * (1.0 - math.exp(-t / model.tau))


def actuator_step(
    opening: float, command_v: float, valve: ValveConfig, dt: float
) -> float:
    """Advance the vane position by one slew-limited step.

    The commanded voltage maps linearly to a target opening; the vane moves
    toward it by at most dt/travel_time_s.  travel_time_s == 0 means the
    vane jumps to the target.  Out-of-range commands are clamped.
    """
    _require_finite("command_v", command_v)
    _require_finite("opening", opening)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    target = (command_v - valve.v_min) / (valve.v_max - valve.v_min)
    target = min(max(target, 0.0), 1.0)
    if valve.travel_time_s == 0:
        return target
    max_move = dt / valve.travel_time_s
    move = target - opening
    if move > max_move:
        move = max_move
    elif move < -max_move:
        move = -max_move
    return opening + move


def _rk4_level(
    h: float, q_in: float, config: TankConfig, load_fraction: float, dt: float
) -> tuple[float, float]:
    """One fixed-step RK4 update of the level ODE C*dh/dt = q_in - q_out.

    Returns (new level, outflow volume over the step).  The outflow volume
    is integrated with the same RK4 weights, so C*dh + dv_out == q_in*dt
    identically and mass balance is exact by construction.
    """
    C = config.capacitance_C

    def rates(level: float) -> tuple[float, float]:
        q_o = config.outflow_at(level, load_fraction)
        return (q_in - q_o) / C, q_o

    k1, o1 = rates(h)
    k2, o2 = rates(h + 0.5 * dt * k1)
    k3, o3 = rates(h + 0.5 * dt * k2)
    k4, o4 = rates(h + dt * k3)
    dh = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    dv_out = (dt / 6.0) * (o1 + 2.0 * o2 + 2.0 * o3 + o4)
    return h + dh, dv_out


def plant_step(
    state: PlantState,
    config: TankConfig,
    valve: ValveConfig,
    command_v: float,
    inlet_limit: float,
    load_fraction: float,
    dt: float,
) -> PlantState:
    """Advance the whole rig by one step of dt seconds.

    Order of effects: the vane slews toward the commanded voltage, the new
    opening fixes q_in for the step, and the level is integrated by RK4
    against the configured outflow law.  The level saturates at the tank
    bounds with sticky overflow/underflow flags rather than raising, so a
    training run survives operator mistakes.
    """
    for name, value in (
        ("command_v", command_v),
        ("inlet_limit", inlet_limit),
        ("load_fraction", load_fraction),
        ("dt", dt),
        ("state.h", state.h),
    ):
        _require_finite(name, value)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not 0.0 <= inlet_limit <= 1.0:
        raise ValueError(f"inlet_limit must be in [0, 1], got {inlet_limit!r}")
    if not 0.0 <= load_fraction <= 1.0:
        raise ValueError(f"load_fraction must be in [0, 1], got {load_fraction!r}")

    opening = actuator_step(state.valve_opening, command_v, valve, dt)
    q_in = opening * inlet_limit * config.q_in_max
    h_new, dv_out = _rk4_level(state.h, q_in, config, load_fraction, dt)

    overflowed = state.overflowed
    underflowed = state.underflowed
    if h_new > config.h_max:
        h_new = config.h_max
        overflowed = True
    elif h_new < 0.0:
        h_new = 0.0
        underflowed = True

    return PlantState(
        t=state.t + dt,
        h=h_new,
        valve_opening=opening,
        q_in=q_in,
        q_out=config.outflow_at(h_new, load_fraction),
        v_in=state.v_in + q_in * dt,
        v_out=state.v_out + dv_out,
        overflowed=overflowed,
        underflowed=underflowed,
    )


@dataclass(frozen=True)
class Measurement:
    pressure_pa: float
    current_ma: float
    level_pct: float


def measure(
    state: PlantState, sensor: SensorConfig, noise_pa: float = 0.0
) -> Measurement:
    """Transmitter reading for the current level.

    Pressure is hydrostatic rho*g*h (plus an optional additive noise hook,
    zero by default); the 4-20 mA loop current clamps at its range ends
    while level_pct reports the unclamped percent of span.
    """
    if state.h < 0:
        raise ValueError("level must be >= 0")
    pressure = sensor.rho * sensor.g * state.h + noise_pa
    ratio = pressure / sensor.p_span_pa
    current = sensor.i_min_ma + (sensor.i_max_ma - sensor.i_min_ma) * ratio
    current = min(max(current, sensor.i_min_ma), sensor.i_max_ma)
    return Measurement(
        pressure_pa=pressure,
        current_ma=current,
        level_pct=100.0 * ratio,
    )


def loop_level_pct(state: PlantState, sensor: SensorConfig) -> float:
    """Percent-of-span PV as the control loop sees it (via the 4-20 mA
    signal, hence clamped to [0, 100])."""
    if state.h < 0:
        raise ValueError("level must be >= 0")
    # algebraically the clamped current mapped back to percent; computed
    # directly because this sits on the per-step hot path
    pct = 100.0 * state.h / sensor.h_span_m
    return min(max(pct, 0.0), 100.0)
