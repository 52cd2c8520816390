"""Live simulation sessions: a single-writer stepper with queued commands.

A session owns all mutable loop state.  Operator commands are validated on
arrival, queued, and applied only at step boundaries, so every logged row
and published snapshot reflects whole steps.  The trajectory is a pure
function of (config, command schedule); wall-clock pacing (the speed
multiplier) is metadata for the driver and never touches the physics,
which is what makes replays byte-identical at any speed.

Persistence is one CSV per session plus a JSON sidecar holding the
resolved config and the full applied-command schedule; `replay_session`
reproduces the CSV from the sidecar alone.
"""

from __future__ import annotations

import json
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Union

from .control import (
    ControllerMode,
    ControllerState,
    Gains,
    OnOffConfig,
    onoff_step,
    pid_step,
    reset,
)
from .plant import PlantState, loop_level_pct, plant_step
from .presets import LoopConfig, get_preset
from .scenario import (
    CSV_HEADER,
    Row,
    SetGains,
    SetInputLimit,
    SetMode,
    SetOnOff,
    SetOutputLoad,
    SetSetpoint,
    _csv_num,
    load_fixture,
)
from .tuning import TuningError, UltimateGainResult, find_ultimate_gain, zn_gains

PROTOCOL_VERSION = 1


class ConfigError(ValueError):
    """Session configuration is invalid."""


class IoError(OSError):
    """The session log could not be opened or written."""


class ValidationError(ValueError):
    """A command was rejected before being queued."""


class SessionClosed(RuntimeError):
    """The session has been closed; no further commands or steps."""


# ----------------------------------------------------------------- commands


@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Reset:
    pass


@dataclass(frozen=True)
class SetSpeed:
    multiplier: float

    def __post_init__(self) -> None:
        if math.isnan(self.multiplier) or self.multiplier <= 0:
            raise ValueError(f"speed must be > 0, got {self.multiplier!r}")


@dataclass(frozen=True)
class LoadScenario:
    name: str


@dataclass(frozen=True)
class StartTune:
    mode: ControllerMode = ControllerMode.PID
    kp_lo: float | None = None
    kp_hi: float | None = None
    tol: float = 0.05

    def __post_init__(self) -> None:
        if self.mode is ControllerMode.ONOFF:
            raise ValueError("cannot tune the on-off mode")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must be in (0, 1), got {self.tol!r}")


Command = Union[
    SetSetpoint,
    SetGains,
    SetMode,
    SetOnOff,
    SetOutputLoad,
    SetInputLimit,
    Start,
    Pause,
    Reset,
    SetSpeed,
    LoadScenario,
    StartTune,
]

# wire names (snake_case) <-> command classes
COMMAND_TYPES: dict[str, type] = {
    "set_setpoint": SetSetpoint,
    "set_gains": SetGains,
    "set_mode": SetMode,
    "set_onoff": SetOnOff,
    "set_output_load": SetOutputLoad,
    "set_input_limit": SetInputLimit,
    "start": Start,
    "pause": Pause,
    "reset": Reset,
    "set_speed": SetSpeed,
    "load_scenario": LoadScenario,
    "start_tune": StartTune,
}
_COMMAND_NAMES = {cls: name for name, cls in COMMAND_TYPES.items()}


def command_name(command: Command) -> str:
    return _COMMAND_NAMES[type(command)]


def command_args(command: Command) -> dict:
    """JSON-ready argument mapping mirroring the command's fields."""
    out = {}
    for f in command.__dataclass_fields__:
        value = getattr(command, f)
        if isinstance(value, ControllerMode):
            value = value.value
        out[f] = value
    return out


def parse_command(name: str, args: dict | None) -> Command:
    """Build a validated command from its wire form.

    Raises ValidationError for unknown names, unknown or missing args, and
    out-of-range values.
    """
    cls = COMMAND_TYPES.get(name)
    if cls is None:
        raise ValidationError(f"unknown command {name!r}")
    kwargs = dict(args or {})
    if "mode" in kwargs and isinstance(kwargs["mode"], str):
        try:
            kwargs["mode"] = ControllerMode(kwargs["mode"])
        except ValueError:
            raise ValidationError(f"unknown mode {kwargs['mode']!r}") from None
    try:
        command = cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad arguments for {name}: {exc}") from None
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return command


# ---------------------------------------------------------------- snapshot


@dataclass(frozen=True)
class ClockState:
    speed: float
    paused: bool


@dataclass(frozen=True)
class Snapshot:
    """Immutable telemetry view of one completed step."""

    t_s: float
    level_pct: float
    level_m: float
    setpoint_pct: float
    output_v: float
    valve_frac: float
    q_in: float
    q_out: float
    mode: ControllerMode
    gains: Gains
    clock: ClockState
    alarms: tuple[str, ...]


@dataclass(frozen=True)
class SessionConfig:
    """What a session needs to start: the loop, optional log, clock."""

    loop: LoopConfig
    log_path: str | None = None
    speed: float = 1.0

    def __post_init__(self) -> None:
        if math.isnan(self.speed) or self.speed <= 0:
            raise ConfigError(f"speed must be > 0, got {self.speed!r}")


def config_from_preset(name: str, **overrides) -> SessionConfig:
    try:
        loop = get_preset(name)
    except (LookupError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return SessionConfig(loop=loop, **overrides)


@dataclass
class _Queued:
    command: Command


class SimSession:
    """Synchronous session core; drivers add pacing and transport.

    All mutation happens in apply_command (clock commands) and tick (one
    step plus queued process commands).  Drivers must serialize calls;
    the class itself is not thread-safe.
    """

    def __init__(self, config: SessionConfig) -> None:
        if not isinstance(config.loop, LoopConfig):
            raise ConfigError("config.loop must be a LoopConfig")
        self.config = config
        self.loop = config.loop
        self.speed = config.speed
        self.paused = True
        self.closed = False
        self.step_index = 0
        self.last_tune: UltimateGainResult | None = None
        self.last_tune_error: str | None = None
        self._tuning = False
        self._pending_tune: StartTune | None = None
        self._queue: deque[_Queued] = deque()
        self._schedule: list = []  # scenario events pending by sim time
        self._log: IO[str] | None = None
        self._log_path = config.log_path
        self._commands_applied: list[dict] = []
        self._init_loop_state()
        if self._log_path is not None:
            self._open_log(truncate=True)

    # -- lifecycle -------------------------------------------------------

    def _init_loop_state(self) -> None:
        loop = self.loop
        self._state = PlantState(h=loop.init_level_m)
        self._cstate: ControllerState = reset()
        self._mode = loop.mode
        self._gains = loop.gains
        self._sp = loop.setpoint_pct
        self._hyst = loop.onoff.hysteresis_pct
        self._load = loop.load_fraction
        self._inlimit = loop.inlet_limit
        self._last_u = 0.0
        self._onoff_cfg: OnOffConfig | None = None
        self._pv = loop_level_pct(self._state, loop.sensor)
        self._delay_buf: deque[float] = deque([self._pv] * loop.deadtime_steps)
        self.step_index = 0

    def _open_log(self, truncate: bool) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None
        try:
            mode = "w" if truncate else "a"
            self._log = open(self._log_path, mode, encoding="utf-8", newline="")
            if truncate:
                self._log.write(CSV_HEADER + "\n")
        except OSError as exc:
            raise IoError(f"cannot open session log {self._log_path!r}: {exc}") from exc

    def close(self) -> None:
        """Flush and close the log and write the replay sidecar."""
        if self.closed:
            return
        self.closed = True
        if self._log is not None:
            self._log.close()
            self._log = None
        if self._log_path is not None:
            self._write_sidecar()

    def _write_sidecar(self) -> None:
        meta = {
            "version": PROTOCOL_VERSION,
            "config": {
                "loop": self.loop.to_dict(),
                "speed": None if math.isinf(self.config.speed) else self.config.speed,
            },
            "steps": self.step_index,
            "commands": self._commands_applied,
        }
        path = sidecar_path(self._log_path)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(meta, f, indent=1, sort_keys=True)
                f.write("\n")
        except OSError as exc:
            raise IoError(f"cannot write sidecar {path!r}: {exc}") from exc

    # -- commands --------------------------------------------------------

    def apply_command(self, command: Command) -> int:
        """Validate and accept one command.

        Returns the step index at which it takes (or took) effect: clock
        commands apply immediately at the current step; process commands
        at the next boundary.  Raises ValidationError or SessionClosed.
        """
        if self.closed:
            raise SessionClosed("session is closed")
        if not isinstance(command, tuple(COMMAND_TYPES.values())):
            raise ValidationError(f"not a command: {command!r}")

        if isinstance(command, Start):
            self.paused = False
            return self.step_index
        if isinstance(command, Pause):
            self.paused = True
            return self.step_index
        if isinstance(command, SetSpeed):
            self.speed = command.multiplier
            return self.step_index
        if isinstance(command, Reset):
            self._init_loop_state()
            self.paused = True
            self._queue.clear()
            self._schedule = []
            self._tuning = False
            # the log restarts here, so the replay ledger does too
            self._commands_applied = []
            if self._log_path is not None:
                self._open_log(truncate=True)
            return 0

        if isinstance(command, LoadScenario):
            try:
                scenario = load_fixture(command.name)
            except (KeyError, ValueError) as exc:
                raise ValidationError(str(exc)) from None
            self.loop = scenario.resolve_loop()
            self._init_loop_state()
            self.paused = True
            self._queue.clear()
            self._tuning = False
            self._commands_applied = []
            self._schedule = list(scenario.events)
            if self._log_path is not None:
                self._open_log(truncate=True)
            return 0

        if self._tuning and isinstance(command, (SetGains, SetMode, SetOnOff)):
            raise ValidationError("tuning owns the controller; wait or reset")
        if isinstance(command, StartTune):
            if self._tuning:
                raise ValidationError("a tuning run is already active")
            if not self.loop.has_phase_lag():
                raise ValidationError(
                    "plant has no phase lag; ultimate gain does not exist"
                )
            self._tuning = True
            self._pending_tune = command
            return self.step_index

        self._queue.append(_Queued(command))
        return self.step_index + 1

    def _record(self, command: Command, step: int) -> None:
        # t_s is the boundary instant; the command first shapes the step
        # that ends at step * dt
        self._commands_applied.append(
            {"step": step, "t_s": (step - 1) * self.loop.dt_s,
             "cmd": command_name(command), "args": command_args(command)}
        )

    @property
    def tuning_active(self) -> bool:
        return self._tuning

    @property
    def plant_state(self) -> PlantState:
        """Full-precision plant state after the latest completed step."""
        return self._state

    def tune_search(self) -> UltimateGainResult:
        """The pure (slow) part of a queued StartTune; safe off-thread.

        Reads only immutable config captured at the call, so a driver may
        run it in a worker while the stepper keeps ticking.
        """
        if self._pending_tune is None:
            raise ValidationError("no tuning run is pending")
        spec = self._pending_tune
        return find_ultimate_gain(
            self.loop, setpoint_pct=self._sp,
            kp_lo=spec.kp_lo, kp_hi=spec.kp_hi, tol=spec.tol,
        )

    def finish_tune(
        self,
        result: UltimateGainResult | None = None,
        error: str | None = None,
    ) -> None:
        """Land a tune outcome; on success queue the mode and gains."""
        if not self._tuning:
            return
        self._tuning = False
        if result is None:
            self.last_tune_error = error or "tuning failed"
            return
        spec = self._pending_tune
        self.last_tune = result
        self.last_tune_error = None
        gains = zn_gains(spec.mode, result.ku, result.pu_s)
        self._queue.append(_Queued(SetMode(spec.mode)))
        self._queue.append(_Queued(SetGains(gains.kp, gains.ki, gains.kd)))

    def run_pending_tune(self) -> UltimateGainResult | None:
        """Execute a queued StartTune to completion (blocking)."""
        if not self._tuning:
            return None
        try:
            result = self.tune_search()
        except TuningError as exc:
            self.finish_tune(error=f"{type(exc).__name__}: {exc}")
            return None
        self.finish_tune(result=result)
        return result

    # -- stepping --------------------------------------------------------

    def _apply_process(self, command: Command) -> None:
        if isinstance(command, SetSetpoint):
            self._sp = command.pct
            self._onoff_cfg = None
        elif isinstance(command, SetOutputLoad):
            self._load = command.fraction
        elif isinstance(command, SetInputLimit):
            self._inlimit = command.fraction
        elif isinstance(command, SetMode):
            self._mode = command.mode
            self._cstate = reset()
            self._onoff_cfg = None
        elif isinstance(command, SetGains):
            self._gains = Gains(kp=command.kp, ki=command.ki, kd=command.kd)
        elif isinstance(command, SetOnOff):
            self._sp, self._hyst = command.sp_pct, command.hyst_pct
            self._onoff_cfg = None
        else:  # pragma: no cover - queue only ever holds process commands
            raise ValidationError(f"cannot apply {command!r} at a boundary")

    def tick(self) -> None:
        """Advance one step: drain queue, controller, plant, log.

        Telemetry is pulled on demand via snapshot(); building it per
        step would dominate the cost of unpaced runs.
        """
        if self.closed:
            raise SessionClosed("session is closed")
        loop = self.loop
        dt = loop.dt_s
        boundary = self.step_index + 1
        t = self.step_index * dt

        while self._schedule and self._schedule[0].at_s <= t + 0.5 * dt:
            event = self._schedule.pop(0)
            self._record(event.action, boundary)
            self._apply_process(event.action)
        while self._queue:
            queued = self._queue.popleft()
            self._record(queued.command, boundary)
            self._apply_process(queued.command)

        if self._delay_buf:
            pv_meas = self._delay_buf.popleft()
            self._delay_buf.append(self._pv)
        else:
            pv_meas = self._pv

        if self._mode is ControllerMode.ONOFF:
            if self._onoff_cfg is None:
                self._onoff_cfg = OnOffConfig(
                    setpoint_pct=self._sp, hysteresis_pct=self._hyst
                )
            u = onoff_step(self._onoff_cfg, pv_meas, self._last_u)
        else:
            u, self._cstate = pid_step(
                self._gains, self._mode, self._sp, pv_meas, self._cstate, dt
            )
        self._last_u = u

        self._state = plant_step(
            self._state, loop.tank, loop.valve, u, self._inlimit, self._load, dt
        )
        self._pv = loop_level_pct(self._state, loop.sensor)
        self.step_index = boundary

        if self._log is not None:
            row = self._row(pv_meas)
            self._log.write(
                ",".join([_csv_num(v) for v in row[:9]] + [row.mode]) + "\n"
            )

    def _row(self, pv_meas: float) -> Row:
        s = self._state
        return Row(
            self.step_index * self.loop.dt_s,
            s.h,
            self._pv,
            self._sp,
            self._sp - pv_meas,
            self._last_u,
            s.valve_opening,
            s.q_in,
            s.q_out,
            self._mode.value,
        )

    def snapshot(self) -> Snapshot:
        """Telemetry for the latest completed step (t=0 before any)."""
        s = self._state
        alarms = []
        if s.overflowed:
            alarms.append("overflow")
        if s.underflowed:
            alarms.append("underflow")
        if self._tuning:
            alarms.append("tuning")
        return Snapshot(
            t_s=self.step_index * self.loop.dt_s,
            level_pct=self._pv,
            level_m=s.h,
            setpoint_pct=self._sp,
            output_v=self._last_u,
            valve_frac=s.valve_opening,
            q_in=s.q_in,
            q_out=s.q_out,
            mode=self._mode,
            gains=self._gains,
            clock=ClockState(speed=self.speed, paused=self.paused),
            alarms=tuple(alarms),
        )

    def flush(self) -> None:
        if self._log is not None:
            self._log.flush()


def session_start(config: SessionConfig) -> SimSession:
    """Create a paused session at t=0 with its log (if any) opened."""
    return SimSession(config)


# ------------------------------------------------------------------ replay


def sidecar_path(log_path: str) -> str:
    root, _ = os.path.splitext(log_path)
    return root + ".meta.json"


def replay_session(meta_path: str, log_path: str | None = None) -> str:
    """Reproduce a session's CSV from its sidecar alone.

    Rebuilds the loop from the recorded config, re-queues every recorded
    command just before its recorded step boundary, and steps the same
    number of times.  The output is byte-identical to the original log
    regardless of the speed either session ran at.  Returns the path of
    the replayed CSV.
    """
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    loop = LoopConfig.from_dict(meta["config"]["loop"])
    if log_path is None:
        root = meta_path[: -len(".meta.json")] if meta_path.endswith(".meta.json") else meta_path
        log_path = root + ".replay.csv"

    by_step: dict[int, list[Command]] = {}
    for entry in meta["commands"]:
        command = parse_command(entry["cmd"], entry["args"])
        by_step.setdefault(int(entry["step"]), []).append(command)

    session = SimSession(SessionConfig(loop=loop, log_path=log_path))
    session.apply_command(Start())
    try:
        for boundary in range(1, int(meta["steps"]) + 1):
            for command in by_step.get(boundary, ()):
                session.apply_command(command)
            session.tick()
    finally:
        session.close()
    return log_path
