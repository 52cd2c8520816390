"""Feedback controllers: on-off with hysteresis, P, PD, PI, and PID.

The PID family uses the parallel form u = Kp*e + Ki*int(e) + Kd*de with the
process variable and output both expressed in percent of span; 100% of
output maps to 10 V at the vane.  The integral is accumulated by trapezoid
with conditional anti-windup (it freezes while the output is pinned at a
rail and the update would push further in), and the derivative acts on the
measurement through a first-order filter so setpoint steps cause no kick.

Controllers are pure step functions over an explicit state value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

V_MAX = 10.0
PCT_PER_VOLT = 10.0  # 100% of controller output == 10 V
DERIVATIVE_FILTER_RATIO = 10.0  # filter time constant = kd / N


class ControllerMode(str, Enum):
    ONOFF = "onoff"
    P = "p"
    PD = "pd"
    PI = "pi"
    PID = "pid"


@dataclass(frozen=True)
class Gains:
    """Parallel-form gains: kp (%/%), ki (1/s), kd (s)."""

    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def for_mode(self, mode: ControllerMode) -> "Gains":
        """Zero out the terms a restricted mode does not use."""
        if mode is ControllerMode.P:
            return Gains(self.kp, 0.0, 0.0)
        if mode is ControllerMode.PD:
            return Gains(self.kp, 0.0, self.kd)
        if mode is ControllerMode.PI:
            return Gains(self.kp, self.ki, 0.0)
        if mode is ControllerMode.PID:
            return self
        raise ValueError(f"mode {mode} has no PID gains")


@dataclass(frozen=True)
class OnOffConfig:
    """Setpoint and dead band for the hysteresis controller, in % of span."""

    setpoint_pct: float = 70.0
    hysteresis_pct: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.setpoint_pct <= 100.0:
            raise ValueError("setpoint_pct must be in [0, 100]")
        if not 0.0 < self.hysteresis_pct <= self.setpoint_pct:
            raise ValueError("hysteresis_pct must be in (0, setpoint_pct]")


@dataclass(frozen=True)
class ControllerState:
    """Discrete-controller memory between steps.

    prev_measurement_pct is None right after reset; the first sample then
    contributes no derivative and integrates as if the error had been flat.
    """

    integral: float = 0.0  # % * s
    prev_measurement_pct: float | None = None
    prev_derivative: float = 0.0  # filtered, %/s
    last_output_v: float = 0.0


def reset(state: ControllerState | None = None) -> ControllerState:
    """Fresh controller memory; the argument is accepted for symmetry."""
    return ControllerState()


def onoff_step(
    cfg: OnOffConfig, measurement_pct: float, prev_output_v: float
) -> float:
    """Two-position control with a dead band below the setpoint.

    At or above the setpoint the vane is driven shut (0 V); at or below
    setpoint - hysteresis it is driven fully open (10 V); strictly inside
    the band the previous output holds, which is what prevents chatter.
    """
    if not math.isfinite(measurement_pct):
        raise ValueError("measurement_pct must be finite")
    if measurement_pct >= cfg.setpoint_pct:
        return 0.0
    if measurement_pct <= cfg.setpoint_pct - cfg.hysteresis_pct:
        return V_MAX
    return prev_output_v


def pid_step(
    gains: Gains,
    mode: ControllerMode,
    setpoint_pct: float,
    measurement_pct: float,
    state: ControllerState,
    dt: float,
) -> tuple[float, ControllerState]:
    """One sample of the parallel-form PID at period dt.

    Returns the 0-10 V command and the updated state.  Restricted modes
    (P, PD, PI) force their unused gains to zero regardless of what the
    Gains value carries.
    """
    if mode is ControllerMode.ONOFF:
        raise ValueError("use onoff_step for the on-off mode")
    for name, value in (
        ("setpoint_pct", setpoint_pct),
        ("measurement_pct", measurement_pct),
        ("dt", dt),
    ):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
    if dt <= 0:
        raise ValueError("dt must be > 0")

    # for_mode allocates; skip it where no masking is needed
    g = gains if mode is ControllerMode.PID else gains.for_mode(mode)
    error = setpoint_pct - measurement_pct

    if g.kd == 0.0 or state.prev_measurement_pct is None:
        derivative = 0.0  # no kick on the first sample after reset
    else:
        # Derivative of -measurement so setpoint steps never differentiate.
        raw = -(measurement_pct - state.prev_measurement_pct) / dt
        t_filter = g.kd / DERIVATIVE_FILTER_RATIO
        alpha = dt / (t_filter + dt)
        derivative = state.prev_derivative + alpha * (raw - state.prev_derivative)

    integral = state.integral
    increment = 0.0
    if g.ki > 0.0:
        if state.prev_measurement_pct is None:
            prev_error = error  # flat-history assumption on the first sample
        else:
            prev_error = setpoint_pct - state.prev_measurement_pct
        increment = 0.5 * (error + prev_error) * dt  # trapezoid
        integral = state.integral + increment
    raw_pct = g.kp * error + g.ki * integral + g.kd * derivative
    # Conditional anti-windup: this step's output keeps the tentative
    # integral, but the stored memory refuses updates that push deeper
    # into a rail, so nothing accumulates while saturated.
    if (raw_pct > 100.0 and increment > 0.0) or (raw_pct < 0.0 and increment < 0.0):
        integral = state.integral

    output_v = min(max(raw_pct / PCT_PER_VOLT, 0.0), V_MAX)
    new_state = ControllerState(
        integral=integral,
        prev_measurement_pct=measurement_pct,
        prev_derivative=derivative,
        last_output_v=output_v,
    )
    return output_v, new_state
