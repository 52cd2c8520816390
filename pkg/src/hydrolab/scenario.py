"""Scripted experiment timelines: parse, run, and score transient response.

A scenario file is a line-oriented script (one directive per line, # for
comments)::

    scenario "pid setpoint ladder"
    plant    paper_like_delay
    control  pid kp=48 ki=2.6666666666666665 kd=216 sp=40
    run      duration=2400s dt=0.1s
    at 600s set sp 50
    at 1200s set sp 60
    at 1800s set sp 80

Plants come from a named preset or an inline block
``plant { C=<num> R=<num> hmax=<num> qmax=<num> outflow=linear|torricelli
travel=<num> deadtime=<num> }`` with rig defaults for omitted keys.
Event directives: ``set sp <num>``, ``set outload <num>``,
``set inlimit <num>``, ``set mode <name> [kp=..] [ki=..] [kd=..]
[sp=..] [hyst=..]``, plus the standalone forms ``set gains kp=.. ki=..
kd=..`` and ``set onoff sp=.. hyst=..``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from collections import deque
from dataclasses import dataclass
from importlib import resources
from statistics import fmean
from typing import NamedTuple, Union

from .control import (
    ControllerMode,
    ControllerState,
    Gains,
    OnOffConfig,
    onoff_step,
    pid_step,
    reset,
)
from .plant import (
    OutflowModel,
    PlantState,
    SensorConfig,
    TankConfig,
    ValveConfig,
    loop_level_pct,
    plant_step,
)
from .presets import LoopConfig, PresetFileError, UnknownPreset, get_preset


class ScenarioSyntaxError(ValueError):
    """Malformed scenario text; carries 1-based line and column."""

    def __init__(self, line: int, col: int, message: str) -> None:
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ScenarioValidationError(ValueError):
    """Well-formed text with an out-of-range or inconsistent value."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class SegmentTooShort(ValueError):
    """A setpoint segment has too few samples to score."""


# ------------------------------------------------------------- event model


@dataclass(frozen=True)
class SetSetpoint:
    pct: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.pct <= 100.0:
            raise ValueError(f"setpoint must be in [0, 100], got {self.pct!r}")


@dataclass(frozen=True)
class SetOutputLoad:
    fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"outload must be in [0, 1], got {self.fraction!r}")


@dataclass(frozen=True)
class SetInputLimit:
    fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"inlimit must be in [0, 1], got {self.fraction!r}")


@dataclass(frozen=True)
class SetMode:
    mode: ControllerMode


@dataclass(frozen=True)
class SetGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self) -> None:
        Gains(kp=self.kp, ki=self.ki, kd=self.kd)  # range check only


@dataclass(frozen=True)
class SetOnOff:
    sp_pct: float
    hyst_pct: float

    def __post_init__(self) -> None:
        OnOffConfig(setpoint_pct=self.sp_pct, hysteresis_pct=self.hyst_pct)


EventAction = Union[SetSetpoint, SetOutputLoad, SetInputLimit, SetMode, SetGains, SetOnOff]


@dataclass(frozen=True)
class ScenarioEvent:
    at_s: float
    action: EventAction

    def __post_init__(self) -> None:
        if not (math.isfinite(self.at_s) and self.at_s >= 0):
            raise ValueError(f"event time must be >= 0, got {self.at_s!r}")


@dataclass(frozen=True)
class Scenario:
    """A fully validated experiment script."""

    name: str
    plant_preset: str | None
    plant_inline: tuple[tuple[str, object], ...] | None
    mode: ControllerMode
    gains: Gains
    setpoint_pct: float
    hysteresis_pct: float
    duration_s: float
    dt_s: float
    events: tuple[ScenarioEvent, ...] = ()

    def __post_init__(self) -> None:
        if (self.plant_preset is None) == (self.plant_inline is None):
            raise ValueError("exactly one of plant_preset/plant_inline required")
        if not 0.0 <= self.setpoint_pct <= 100.0:
            raise ValueError("setpoint_pct must be in [0, 100]")
        if not 0.0 < self.hysteresis_pct <= 100.0:
            raise ValueError("hysteresis_pct must be in (0, 100]")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError("duration_s must be > 0")
        if not 0.0 < self.dt_s <= 1.0:
            raise ValueError("dt_s must be in (0, 1]")
        if round(self.duration_s / self.dt_s) < 1:
            raise ValueError("duration_s must cover at least one step")
        times = [e.at_s for e in self.events]
        if times != sorted(times):
            raise ValueError("events must be sorted by time")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.dt_s))

    def resolve_loop(self) -> LoopConfig:
        """Materialize the closed-loop configuration this scenario runs on."""
        if self.plant_preset is not None:
            base = get_preset(self.plant_preset)
        else:
            base = _loop_from_inline(dict(self.plant_inline), self.name)
        onoff = base.onoff
        if self.mode is ControllerMode.ONOFF:
            onoff = OnOffConfig(
                setpoint_pct=self.setpoint_pct, hysteresis_pct=self.hysteresis_pct
            )
        return dataclasses.replace(
            base,
            dt_s=self.dt_s,
            mode=self.mode,
            gains=self.gains,
            onoff=onoff,
            setpoint_pct=self.setpoint_pct,
        )


_INLINE_DEFAULTS = {
    "C": 0.5063,
    "R": 2000.0,
    "hmax": 1.0,
    "qmax": 5.0e-4,
    "outflow": "linear",
    "travel": 25.0,
    "deadtime": 0.0,
}


def _loop_from_inline(kv: dict[str, object], name: str) -> LoopConfig:
    merged = dict(_INLINE_DEFAULTS)
    merged.update(kv)
    tank = TankConfig(
        capacitance_C=float(merged["C"]),
        resistance_R=float(merged["R"]),
        area_A=float(merged["C"]),
        h_max=float(merged["hmax"]),
        q_in_max=float(merged["qmax"]),
        outflow_model=OutflowModel(str(merged["outflow"])),
    )
    return LoopConfig(
        name=f"inline:{name}",
        tank=tank,
        valve=ValveConfig(travel_time_s=float(merged["travel"])),
        sensor=SensorConfig(),
        deadtime_s=float(merged["deadtime"]),
    )


# ----------------------------------------------------------------- parsing

_MODES = {m.value: m for m in ControllerMode}
_CONTROL_KEYS = ("kp", "ki", "kd", "sp", "hyst")


class _Tok(NamedTuple):
    col: int
    text: str


def _tokens(line: str) -> list[_Tok]:
    return [_Tok(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]


def _num(tok: _Tok, lineno: int) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise ScenarioSyntaxError(lineno, tok.col, f"expected a number, got {tok.text!r}")
    if not math.isfinite(value):
        raise ScenarioSyntaxError(lineno, tok.col, "number must be finite")
    return value


def _seconds(tok: _Tok, lineno: int) -> float:
    if not tok.text.endswith("s"):
        raise ScenarioSyntaxError(lineno, tok.col, f"expected <num>s, got {tok.text!r}")
    return _num(_Tok(tok.col, tok.text[:-1]), lineno)


def _key_values(
    toks: list[_Tok], lineno: int, allowed: tuple[str, ...]
) -> dict[str, _Tok]:
    out: dict[str, _Tok] = {}
    for tok in toks:
        key, eq, value = tok.text.partition("=")
        if not eq or not value:
            raise ScenarioSyntaxError(lineno, tok.col, f"expected key=value, got {tok.text!r}")
        if key not in allowed:
            raise ScenarioSyntaxError(lineno, tok.col, f"unknown key {key!r}")
        if key in out:
            raise ScenarioSyntaxError(lineno, tok.col, f"duplicate key {key!r}")
        out[key] = _Tok(tok.col + len(key) + 1, value)
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate scenario text.

    Raises ScenarioSyntaxError (with line/col) for malformed lines and
    ScenarioValidationError (with the offending field) for out-of-range or
    inconsistent values, including hysteresis checks replayed over the
    event timeline.
    """
    name: str | None = None
    plant_preset: str | None = None
    plant_inline: tuple[tuple[str, object], ...] | None = None
    control: dict[str, object] | None = None
    run: tuple[float, float] | None = None
    events: list[ScenarioEvent] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        toks = _tokens(raw)
        head = toks[0]

        if head.text == "scenario":
            if name is not None:
                raise ScenarioSyntaxError(lineno, head.col, "duplicate scenario line")
            m = re.match(r'\s*scenario\s+"([^"]*)"\s*$', raw)
            if m is None:
                col = toks[1].col if len(toks) > 1 else head.col + len(head.text)
                raise ScenarioSyntaxError(lineno, col, 'expected scenario "<name>"')
            name = m.group(1)

        elif head.text == "plant":
            if plant_preset is not None or plant_inline is not None:
                raise ScenarioSyntaxError(lineno, head.col, "duplicate plant line")
            if len(toks) < 2:
                raise ScenarioSyntaxError(lineno, head.col, "plant needs a preset or { ... }")
            if toks[1].text == "{":
                if toks[-1].text != "}":
                    raise ScenarioSyntaxError(lineno, toks[-1].col, "unterminated plant block")
                kv = _key_values(toks[2:-1], lineno, tuple(_INLINE_DEFAULTS))
                pairs: list[tuple[str, object]] = []
                for key, vtok in kv.items():
                    if key == "outflow":
                        if vtok.text not in ("linear", "torricelli"):
                            raise ScenarioSyntaxError(
                                lineno, vtok.col, "outflow must be linear or torricelli"
                            )
                        pairs.append((key, vtok.text))
                    else:
                        pairs.append((key, _num(vtok, lineno)))
                plant_inline = tuple(pairs)
                try:
                    _loop_from_inline(dict(plant_inline), name or "unnamed")
                except ValueError as exc:
                    raise ScenarioValidationError("plant", str(exc)) from exc
            else:
                if len(toks) > 2:
                    raise ScenarioSyntaxError(lineno, toks[2].col, "unexpected token after preset")
                preset = toks[1].text
                try:
                    get_preset(preset)
                except (UnknownPreset, PresetFileError) as exc:
                    raise ScenarioValidationError("plant", str(exc)) from exc
                plant_preset = preset

        elif head.text == "control":
            if control is not None:
                raise ScenarioSyntaxError(lineno, head.col, "duplicate control line")
            if len(toks) < 2:
                raise ScenarioSyntaxError(lineno, head.col, "control needs a mode")
            mode_tok = toks[1]
            if mode_tok.text not in _MODES:
                raise ScenarioSyntaxError(
                    lineno, mode_tok.col, f"unknown mode {mode_tok.text!r}"
                )
            kv = _key_values(toks[2:], lineno, _CONTROL_KEYS)
            values = {k: _num(v, lineno) for k, v in kv.items()}
            control = {"mode": _MODES[mode_tok.text], **values}

        elif head.text == "run":
            if run is not None:
                raise ScenarioSyntaxError(lineno, head.col, "duplicate run line")
            kv = _key_values(toks[1:], lineno, ("duration", "dt"))
            if "duration" not in kv or "dt" not in kv:
                raise ScenarioSyntaxError(lineno, head.col, "run needs duration=<num>s dt=<num>s")
            run = (_seconds(kv["duration"], lineno), _seconds(kv["dt"], lineno))

        elif head.text == "at":
            if len(toks) < 4 or toks[2].text != "set":
                raise ScenarioSyntaxError(lineno, head.col, "expected at <num>s set <what> ...")
            at_s = _seconds(toks[1], lineno)
            what = toks[3]
            rest = toks[4:]
            try:
                if what.text == "sp":
                    if len(rest) != 1:
                        raise ScenarioSyntaxError(lineno, what.col, "set sp takes one number")
                    action: EventAction = SetSetpoint(_num(rest[0], lineno))
                elif what.text == "outload":
                    if len(rest) != 1:
                        raise ScenarioSyntaxError(lineno, what.col, "set outload takes one number")
                    action = SetOutputLoad(_num(rest[0], lineno))
                elif what.text == "inlimit":
                    if len(rest) != 1:
                        raise ScenarioSyntaxError(lineno, what.col, "set inlimit takes one number")
                    action = SetInputLimit(_num(rest[0], lineno))
                elif what.text == "mode":
                    if not rest or rest[0].text not in _MODES:
                        col = rest[0].col if rest else what.col
                        raise ScenarioSyntaxError(lineno, col, "set mode needs a mode name")
                    mode = _MODES[rest[0].text]
                    allowed = ("sp", "hyst") if mode is ControllerMode.ONOFF else ("kp", "ki", "kd")
                    kv = _key_values(rest[1:], lineno, allowed)
                    values = {k: _num(v, lineno) for k, v in kv.items()}
                    events.append(ScenarioEvent(at_s, SetMode(mode)))
                    if not values:
                        continue  # bare mode switch keeps current tuning
                    if mode is ControllerMode.ONOFF:
                        if set(values) != {"sp", "hyst"}:
                            raise ScenarioSyntaxError(
                                lineno, what.col, "set mode onoff needs both sp= and hyst="
                            )
                        action = SetOnOff(values["sp"], values["hyst"])
                    else:
                        action = SetGains(
                            values.get("kp", 0.0), values.get("ki", 0.0), values.get("kd", 0.0)
                        )
                elif what.text == "gains":
                    kv = _key_values(rest, lineno, ("kp", "ki", "kd"))
                    values = {k: _num(v, lineno) for k, v in kv.items()}
                    action = SetGains(
                        values.get("kp", 0.0), values.get("ki", 0.0), values.get("kd", 0.0)
                    )
                elif what.text == "onoff":
                    kv = _key_values(rest, lineno, ("sp", "hyst"))
                    if set(kv) != {"sp", "hyst"}:
                        raise ScenarioSyntaxError(lineno, what.col, "set onoff needs sp= and hyst=")
                    action = SetOnOff(_num(kv["sp"], lineno), _num(kv["hyst"], lineno))
                else:
                    raise ScenarioSyntaxError(lineno, what.col, f"unknown event {what.text!r}")
            except ValueError as exc:
                if isinstance(exc, (ScenarioSyntaxError, ScenarioValidationError)):
                    raise
                raise ScenarioValidationError(what.text, f"line {lineno}: {exc}") from exc
            events.append(ScenarioEvent(at_s, action))

        else:
            raise ScenarioSyntaxError(lineno, head.col, f"unknown directive {head.text!r}")

    for field, value in (("scenario", name), ("control", control), ("run", run)):
        if value is None:
            raise ScenarioValidationError(field, f"missing {field} line")
    if plant_preset is None and plant_inline is None:
        raise ScenarioValidationError("plant", "missing plant line")

    mode = control["mode"]
    gains_kv = {k: control[k] for k in ("kp", "ki", "kd") if k in control}
    try:
        gains = Gains(**gains_kv)
    except ValueError as exc:
        raise ScenarioValidationError("gains", str(exc)) from exc
    sp = float(control.get("sp", 70.0))
    hyst = float(control.get("hyst", 10.0))

    try:
        scenario = Scenario(
            name=name,
            plant_preset=plant_preset,
            plant_inline=plant_inline,
            mode=mode,
            gains=gains,
            setpoint_pct=sp,
            hysteresis_pct=hyst,
            duration_s=run[0],
            dt_s=run[1],
            events=tuple(events),
        )
    except ValueError as exc:
        raise ScenarioValidationError("scenario", str(exc)) from exc
    _check_onoff_timeline(scenario)
    return scenario


def _check_onoff_timeline(scenario: Scenario) -> None:
    """Replay events to catch hysteresis/setpoint combinations that would
    only blow up mid-run (hysteresis band must stay above 0%)."""
    mode = scenario.mode
    sp = scenario.setpoint_pct
    hyst = scenario.hysteresis_pct

    def check(where: str) -> None:
        if mode is ControllerMode.ONOFF and hyst > sp:
            raise ScenarioValidationError(
                "hyst", f"{where}: hysteresis {hyst} exceeds setpoint {sp}"
            )

    check("control line")
    for event in scenario.events:
        a = event.action
        if isinstance(a, SetSetpoint):
            sp = a.pct
        elif isinstance(a, SetMode):
            mode = a.mode
        elif isinstance(a, SetOnOff):
            sp, hyst = a.sp_pct, a.hyst_pct
        check(f"event at {event.at_s}s")


# ------------------------------------------------------------ serialization


def _fnum(x: float) -> str:
    return repr(float(x))


def serialize_scenario(scenario: Scenario) -> str:
    """Render a Scenario back to grammar text.

    Round-trip contract: parse(serialize(s)) == s.
    """
    lines = [f'scenario "{scenario.name}"']
    if scenario.plant_preset is not None:
        lines.append(f"plant    {scenario.plant_preset}")
    else:
        body = " ".join(
            f"{k}={v if isinstance(v, str) else _fnum(v)}"
            for k, v in scenario.plant_inline
        )
        lines.append("plant    { " + body + " }" if body else "plant    { }")

    parts = [f"control  {scenario.mode.value}"]
    if scenario.mode is ControllerMode.ONOFF:
        parts.append(f"sp={_fnum(scenario.setpoint_pct)}")
        parts.append(f"hyst={_fnum(scenario.hysteresis_pct)}")
    else:
        g = scenario.gains
        parts += [f"kp={_fnum(g.kp)}", f"ki={_fnum(g.ki)}", f"kd={_fnum(g.kd)}"]
        parts.append(f"sp={_fnum(scenario.setpoint_pct)}")
        parts.append(f"hyst={_fnum(scenario.hysteresis_pct)}")
    lines.append(" ".join(parts))
    lines.append(
        f"run      duration={_fnum(scenario.duration_s)}s dt={_fnum(scenario.dt_s)}s"
    )

    for event in scenario.events:
        t = f"at {_fnum(event.at_s)}s set"
        a = event.action
        if isinstance(a, SetSetpoint):
            lines.append(f"{t} sp {_fnum(a.pct)}")
        elif isinstance(a, SetOutputLoad):
            lines.append(f"{t} outload {_fnum(a.fraction)}")
        elif isinstance(a, SetInputLimit):
            lines.append(f"{t} inlimit {_fnum(a.fraction)}")
        elif isinstance(a, SetMode):
            lines.append(f"{t} mode {a.mode.value}")
        elif isinstance(a, SetGains):
            lines.append(f"{t} gains kp={_fnum(a.kp)} ki={_fnum(a.ki)} kd={_fnum(a.kd)}")
        elif isinstance(a, SetOnOff):
            lines.append(f"{t} onoff sp={_fnum(a.sp_pct)} hyst={_fnum(a.hyst_pct)}")
        else:  # pragma: no cover - exhaustive by construction
            raise TypeError(f"unknown action {a!r}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- time series

CSV_HEADER = "t_s,level_m,level_pct,sp_pct,error_pct,u_volts,valve_frac,q_in_m3s,q_out_m3s,mode"


class Row(NamedTuple):
    t_s: float
    level_m: float
    level_pct: float
    sp_pct: float
    error_pct: float
    u_volts: float
    valve_frac: float
    q_in_m3s: float
    q_out_m3s: float
    mode: str


def _csv_num(x: float) -> str:
    return format(0.0 if x == 0 else x, ".9g")


@dataclass(frozen=True)
class TimeSeries:
    """A run log, one row per simulation step."""

    rows: tuple[Row, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[float | str]:
        return [getattr(r, name) for r in self.rows]

    def to_csv_text(self) -> str:
        out = [CSV_HEADER]
        for r in self.rows:
            out.append(
                ",".join(
                    [_csv_num(v) for v in r[:9]] + [r.mode]
                )
            )
        return "\n".join(out) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "TimeSeries":
        lines = text.splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError("bad or missing CSV header")
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 10:
                raise ValueError(f"line {lineno}: expected 10 fields, got {len(parts)}")
            rows.append(Row(*[float(p) for p in parts[:9]], parts[9]))
        return cls(rows=tuple(rows))

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path, "r", encoding="utf-8", newline="") as f:
            return cls.from_csv_text(f.read())


# ---------------------------------------------------------------- running


def run_scenario(scenario: Scenario, loop: LoopConfig | None = None) -> TimeSeries:
    """Execute the scenario and return its full log, one row per step.

    Events apply at step boundaries: the first boundary whose time is
    within half a step of the event timestamp.  Deterministic: identical
    scenario and configs give identical rows.
    """
    if loop is None:
        loop = scenario.resolve_loop()
    dt = loop.dt_s

    state = PlantState(h=loop.init_level_m)
    cstate: ControllerState = reset()
    mode = loop.mode
    gains = loop.gains
    sp = loop.setpoint_pct
    hyst = loop.onoff.hysteresis_pct
    load = loop.load_fraction
    inlimit = loop.inlet_limit
    last_u = 0.0
    onoff_cfg: OnOffConfig | None = None

    pv_now = loop_level_pct(state, loop.sensor)
    n_delay = loop.deadtime_steps
    buf: deque[float] = deque([pv_now] * n_delay)

    pending = list(scenario.events)
    pending.reverse()  # pop() from the front of the timeline
    rows: list[Row] = []

    for k in range(scenario.n_steps):
        t = k * dt
        while pending and pending[-1].at_s <= t + 0.5 * dt:
            action = pending.pop().action
            if isinstance(action, SetSetpoint):
                sp = action.pct
                onoff_cfg = None
            elif isinstance(action, SetOutputLoad):
                load = action.fraction
            elif isinstance(action, SetInputLimit):
                inlimit = action.fraction
            elif isinstance(action, SetMode):
                mode = action.mode
                cstate = reset()
                onoff_cfg = None
            elif isinstance(action, SetGains):
                gains = Gains(kp=action.kp, ki=action.ki, kd=action.kd)
            elif isinstance(action, SetOnOff):
                sp, hyst = action.sp_pct, action.hyst_pct
                onoff_cfg = None

        if n_delay:
            pv_meas = buf.popleft()
            buf.append(pv_now)
        else:
            pv_meas = pv_now

        if mode is ControllerMode.ONOFF:
            if onoff_cfg is None:
                onoff_cfg = OnOffConfig(setpoint_pct=sp, hysteresis_pct=hyst)
            u = onoff_step(onoff_cfg, pv_meas, last_u)
        else:
            u, cstate = pid_step(gains, mode, sp, pv_meas, cstate, dt)
        last_u = u

        state = plant_step(state, loop.tank, loop.valve, u, inlimit, load, dt)
        pv_now = loop_level_pct(state, loop.sensor)
        rows.append(
            Row(
                (k + 1) * dt,
                state.h,
                pv_now,
                sp,
                sp - pv_meas,
                u,
                state.valve_opening,
                state.q_in,
                state.q_out,
                mode.value,
            )
        )
    return TimeSeries(rows=tuple(rows))


# ----------------------------------------------------------------- metrics


@dataclass(frozen=True)
class TransientMetrics:
    """Scores for one constant-setpoint segment of a run."""

    segment_start_s: float
    segment_end_s: float
    settling_time_s: float | None  # None: never settled within the band
    steady_state_error_pct: float
    max_deviation_pct: float  # signed, extremal pv - sp
    overshoot_pct: float  # percent of the setpoint step, 0 for regulation


def compute_metrics(series: TimeSeries, band_pct: float = 2.0) -> list[TransientMetrics]:
    """Per-setpoint-segment transient metrics.

    Settling time is the first instant after which |pv - final| stays
    within band_pct of span, with final = the mean of the segment's last
    5% of samples.  Overshoot is measured beyond the new setpoint in the
    direction of the step, as a percentage of the step size.
    """
    if not series.rows:
        raise ValueError("series is empty")
    if not band_pct > 0:
        raise ValueError("band_pct must be > 0")

    segments: list[list[Row]] = []
    for row in series.rows:
        if segments and segments[-1][0].sp_pct == row.sp_pct:
            segments[-1].append(row)
        else:
            segments.append([row])

    out: list[TransientMetrics] = []
    prev_sp: float | None = None
    for seg in segments:
        n = len(seg)
        if n < 10:
            raise SegmentTooShort(
                f"segment at {seg[0].t_s}s has {n} samples, need at least 10"
            )
        sp = seg[0].sp_pct
        pv = [r.level_pct for r in seg]
        tail = max(1, -(-n // 20))  # ceil(n * 0.05)
        final = fmean(pv[-tail:])

        settle_idx = n
        for i in range(n - 1, -1, -1):
            if abs(pv[i] - final) <= band_pct:
                settle_idx = i
            else:
                break
        settling = seg[settle_idx].t_s - seg[0].t_s if settle_idx < n else None

        deviation = max((p - sp for p in pv), key=abs)
        step = 0.0 if prev_sp is None else sp - prev_sp
        if step > 0:
            overshoot = max(0.0, (max(pv) - sp) / step * 100.0)
        elif step < 0:
            overshoot = max(0.0, (sp - min(pv)) / -step * 100.0)
        else:
            overshoot = 0.0

        out.append(
            TransientMetrics(
                segment_start_s=seg[0].t_s,
                segment_end_s=seg[-1].t_s,
                settling_time_s=settling,
                steady_state_error_pct=sp - final,
                max_deviation_pct=deviation,
                overshoot_pct=overshoot,
            )
        )
        prev_sp = sp
    return out


# ---------------------------------------------------------------- fixtures


def fixture_names() -> list[str]:
    """Names of the shipped scenario files (without extension)."""
    pkg = resources.files(__package__) / "fixtures"
    return sorted(p.name[: -len(".scn")] for p in pkg.iterdir() if p.name.endswith(".scn"))


def load_fixture(name: str) -> Scenario:
    """Parse one shipped scenario by name (e.g. 'fig6_setpoint_ladder')."""
    path = resources.files(__package__) / "fixtures" / f"{name}.scn"
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(f"no fixture named {name!r}; have {fixture_names()}") from None
    return parse_scenario(text)
