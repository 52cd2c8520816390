"""Named loop configurations and the preset lookup path.

A LoopConfig bundles everything a closed loop needs: tank, vane, transmitter,
loop dead time, step size, and the initial controller setup.  Presets can be
overridden or extended by dropping `<name>.json` files into a directory named
by the HYDROLAB_PRESET_DIR environment variable.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .control import ControllerMode, Gains, OnOffConfig
from .plant import OutflowModel, SensorConfig, TankConfig, ValveConfig

PRESET_DIR_ENV = "HYDROLAB_PRESET_DIR"


class UnknownPreset(LookupError):
    """No preset with that name, neither built in nor in the preset dir."""


class PresetFileError(ValueError):
    """A preset JSON file exists but cannot be parsed into a LoopConfig."""


@dataclass(frozen=True)
class LoopConfig:
    """One complete closed-loop setup (plant, sensor, controller defaults)."""

    name: str
    tank: TankConfig = field(default_factory=TankConfig)
    valve: ValveConfig = field(default_factory=ValveConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    deadtime_s: float = 0.0  # loop transport delay, measurement side
    dt_s: float = 0.1
    mode: ControllerMode = ControllerMode.PID
    gains: Gains = field(default_factory=Gains)
    onoff: OnOffConfig = field(default_factory=OnOffConfig)
    setpoint_pct: float = 70.0
    load_fraction: float = 1.0
    inlet_limit: float = 1.0
    init_level_m: float = 0.0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("name must be non-empty")
        if not math.isfinite(self.deadtime_s) or self.deadtime_s < 0:
            raise ValueError("deadtime_s must be finite and >= 0")
        if not 0.0 < self.dt_s <= 1.0:
            raise ValueError("dt_s must be in (0, 1]")
        if not 0.0 <= self.setpoint_pct <= 100.0:
            raise ValueError("setpoint_pct must be in [0, 100]")
        for fname in ("load_fraction", "inlet_limit"):
            value = getattr(self, fname)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{fname} must be in [0, 1]")
        if not 0.0 <= self.init_level_m <= self.tank.h_max:
            raise ValueError("init_level_m must be within [0, h_max]")

    @property
    def deadtime_steps(self) -> int:
        return round(self.deadtime_s / self.dt_s)

    def has_phase_lag(self) -> bool:
        """Whether the loop contains any lag beyond the first-order tank."""
        return self.deadtime_s > 0 or self.valve.travel_time_s > 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tank": {
                "C": self.tank.capacitance_C,
                "R": self.tank.resistance_R,
                "A": self.tank.area_A,
                "hmax": self.tank.h_max,
                "qmax": self.tank.q_in_max,
                "outflow": self.tank.outflow_model.value,
                "torricelli_k": self.tank.torricelli_coeff,
            },
            "valve": {
                "travel": self.valve.travel_time_s,
                "vmin": self.valve.v_min,
                "vmax": self.valve.v_max,
            },
            "sensor": {
                "p_span": self.sensor.p_span_pa,
                "i_min": self.sensor.i_min_ma,
                "i_max": self.sensor.i_max_ma,
                "rho": self.sensor.rho,
                "g": self.sensor.g,
            },
            "deadtime": self.deadtime_s,
            "dt": self.dt_s,
            "mode": self.mode.value,
            "gains": {"kp": self.gains.kp, "ki": self.gains.ki, "kd": self.gains.kd},
            "onoff": {
                "sp": self.onoff.setpoint_pct,
                "hyst": self.onoff.hysteresis_pct,
            },
            "sp": self.setpoint_pct,
            "outload": self.load_fraction,
            "inlimit": self.inlet_limit,
            "h0": self.init_level_m,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LoopConfig":
        try:
            tank_d = dict(data.get("tank", {}))
            valve_d = dict(data.get("valve", {}))
            sensor_d = dict(data.get("sensor", {}))
            tank = TankConfig(
                capacitance_C=float(tank_d.get("C", 0.5063)),
                resistance_R=float(tank_d.get("R", 2000.0)),
                area_A=float(tank_d.get("A", tank_d.get("C", 0.5063))),
                h_max=float(tank_d.get("hmax", 1.0)),
                q_in_max=float(tank_d.get("qmax", 5.0e-4)),
                outflow_model=OutflowModel(tank_d.get("outflow", "linear")),
                torricelli_coeff=(
                    None
                    if tank_d.get("torricelli_k") is None
                    else float(tank_d["torricelli_k"])
                ),
            )
            valve = ValveConfig(
                travel_time_s=float(valve_d.get("travel", 25.0)),
                v_min=float(valve_d.get("vmin", 0.0)),
                v_max=float(valve_d.get("vmax", 10.0)),
            )
            sensor = SensorConfig(
                p_span_pa=float(sensor_d.get("p_span", 6600.0)),
                i_min_ma=float(sensor_d.get("i_min", 4.0)),
                i_max_ma=float(sensor_d.get("i_max", 20.0)),
                rho=float(sensor_d.get("rho", 998.2)),
                g=float(sensor_d.get("g", 9.8)),
            )
            gains_d = dict(data.get("gains", {}))
            onoff_d = dict(data.get("onoff", {}))
            return cls(
                name=str(data["name"]),
                tank=tank,
                valve=valve,
                sensor=sensor,
                deadtime_s=float(data.get("deadtime", 0.0)),
                dt_s=float(data.get("dt", 0.1)),
                mode=ControllerMode(data.get("mode", "pid")),
                gains=Gains(
                    kp=float(gains_d.get("kp", 0.0)),
                    ki=float(gains_d.get("ki", 0.0)),
                    kd=float(gains_d.get("kd", 0.0)),
                ),
                onoff=OnOffConfig(
                    setpoint_pct=float(onoff_d.get("sp", 70.0)),
                    hysteresis_pct=float(onoff_d.get("hyst", 10.0)),
                ),
                setpoint_pct=float(data.get("sp", 70.0)),
                load_fraction=float(data.get("outload", 1.0)),
                inlet_limit=float(data.get("inlimit", 1.0)),
                init_level_m=float(data.get("h0", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PresetFileError(f"bad preset data: {exc}") from exc


def _zn_pid_default() -> Gains:
    # Z-N PID row for ku=80, pu=36: kp=0.6*ku, ki=2*kp/pu, kd=kp*pu/8
    return Gains(kp=48.0, ki=8.0 / 3.0, kd=216.0)


def _rig_tank() -> TankConfig:
    return TankConfig()  # defaults are the training-rig values


def _paper_default() -> LoopConfig:
    """The rig as shipped: linear outflow, 25 s vane travel, no dead time."""
    return LoopConfig(
        name="paper_default",
        tank=_rig_tank(),
        valve=ValveConfig(),
        sensor=SensorConfig(),
        mode=ControllerMode.PID,
        gains=_zn_pid_default(),
        onoff=OnOffConfig(setpoint_pct=70.0, hysteresis_pct=10.0),
        setpoint_pct=70.0,
    )


def _paper_like_delay() -> LoopConfig:
    """The rig plus 4 s of loop dead time, enough lag for a finite
    ultimate gain, so the Z-N experiment is runnable."""
    return LoopConfig(
        name="paper_like_delay",
        tank=_rig_tank(),
        valve=ValveConfig(),
        sensor=SensorConfig(),
        deadtime_s=4.0,
        mode=ControllerMode.PID,
        gains=_zn_pid_default(),
        onoff=OnOffConfig(setpoint_pct=70.0, hysteresis_pct=10.0),
        setpoint_pct=70.0,
    )


def _paper_no_delay() -> LoopConfig:
    """The rig with an ideal instant vane and no dead time: a pure
    first-order loop that cannot sustain oscillation under P control."""
    return LoopConfig(
        name="paper_no_delay",
        tank=_rig_tank(),
        valve=ValveConfig(travel_time_s=0.0),
        sensor=SensorConfig(),
        mode=ControllerMode.PID,
        gains=_zn_pid_default(),
        onoff=OnOffConfig(setpoint_pct=70.0, hysteresis_pct=10.0),
        setpoint_pct=70.0,
    )


def _fopdt_test() -> LoopConfig:
    """Unit-DC-gain first-order-plus-dead-time loop: tau=10 s, L=2 s.

    Sized so percent-out over percent-in is exactly 1/(10s+1)*e^(-2s):
    the sensor span is 1 m, R*C = 10 s, and qmax*R equals the span.
    """
    rho, g = 998.2, 9.8
    return LoopConfig(
        name="fopdt_test",
        tank=TankConfig(
            capacitance_C=1.0,
            resistance_R=10.0,
            area_A=1.0,
            h_max=2.0,
            q_in_max=0.1,
        ),
        valve=ValveConfig(travel_time_s=0.0),
        sensor=SensorConfig(p_span_pa=rho * g * 1.0, rho=rho, g=g),
        deadtime_s=2.0,
        dt_s=0.01,
        mode=ControllerMode.P,
        gains=Gains(kp=1.0),
        setpoint_pct=50.0,
        init_level_m=0.5,
    )


def _geometric_consistent() -> LoopConfig:
    """Rig variant whose capacitance follows from the quoted vessel
    diameter (pi*d^2/4 with d=0.15 m) instead of the nameplate value."""
    area = math.pi * 0.15**2 / 4.0
    return LoopConfig(
        name="geometric_consistent",
        tank=TankConfig(capacitance_C=area, area_A=area),
        valve=ValveConfig(),
        sensor=SensorConfig(),
        mode=ControllerMode.PID,
        gains=_zn_pid_default(),
        onoff=OnOffConfig(setpoint_pct=70.0, hysteresis_pct=10.0),
        setpoint_pct=70.0,
    )


_BUILTIN: dict[str, Any] = {
    "paper_default": _paper_default,
    "paper_like_delay": _paper_like_delay,
    "paper_no_delay": _paper_no_delay,
    "fopdt_test": _fopdt_test,
    "geometric_consistent": _geometric_consistent,
}


def _preset_dir() -> Path | None:
    raw = os.environ.get(PRESET_DIR_ENV)
    return Path(raw) if raw else None


def get_preset(name: str) -> LoopConfig:
    """Resolve a preset by name; HYDROLAB_PRESET_DIR files shadow built-ins."""
    directory = _preset_dir()
    if directory is not None:
        path = directory / f"{name}.json"
        if path.is_file():
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise PresetFileError(f"{path}: {exc}") from exc
            cfg = LoopConfig.from_dict(data)
            if cfg.name != name:
                raise PresetFileError(
                    f"{path}: preset names itself {cfg.name!r}, expected {name!r}"
                )
            return cfg
    maker = _BUILTIN.get(name)
    if maker is None:
        raise UnknownPreset(
            f"unknown preset {name!r}; known: {', '.join(list_presets())}"
        )
    return maker()


def list_presets() -> list[str]:
    """All resolvable preset names, built-in plus preset-dir files."""
    names = set(_BUILTIN)
    directory = _preset_dir()
    if directory is not None and directory.is_dir():
        names.update(p.stem for p in directory.glob("*.json"))
    return sorted(names)
