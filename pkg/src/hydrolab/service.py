"""Network front end: one live session behind a FastAPI app.

The app owns a single `SimSession` and a stepper task that paces it at
`dt / speed` wall seconds per step (unlimited speed steps flat out,
yielding periodically).  All session mutation happens on the app's event
loop, which is what enforces the single-writer invariant; the slow
tuning search runs in a worker thread but only reads immutable config,
and its outcome is landed back on the loop.

Wire protocol on `/ws` (one JSON object per message):

    server -> {"hello": {"version": 1, "config": {...}}}      on connect
    client -> {"cmd": "set_setpoint", "args": {"pct": 55}, "id": 7}
    server -> {"ack": 7, "applied_at_step": 1041}
    server -> {"error": 7, "message": "setpoint must be in [0, 100]"}
    server -> {"snapshot": {...}}                              while running

Snapshot fan-out is bounded per client and drops oldest frames under
backpressure; the CSV log is written synchronously in the stepper and is
never dropped.
"""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import json
import math
import os
import time
from typing import Any, Optional, Union

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .control import ControllerMode
from .presets import list_presets
from .scenario import (
    SegmentTooShort,
    ScenarioSyntaxError,
    ScenarioValidationError,
    compute_metrics,
    fixture_names,
    load_fixture,
    parse_scenario,
    run_scenario,
)
from .session import (
    PROTOCOL_VERSION,
    SessionClosed,
    SessionConfig,
    SimSession,
    Snapshot,
    StartTune,
    ValidationError,
    command_name,
    config_from_preset,
    parse_command,
)
from .tuning import TuningError, find_ultimate_gain, zn_gains

SNAPSHOT_QUEUE_SIZE = 64  # per client; oldest frames drop under backpressure
SNAPSHOT_MIN_INTERVAL_S = 1.0 / 30.0  # wall-clock publish throttle
_YIELD_EVERY = 64  # unpaced ticks between event-loop yields


# -------------------------------------------------------------- wire models


class CommandFrame(BaseModel):
    cmd: str
    args: dict[str, Any] = Field(default_factory=dict)
    id: Union[int, str, None] = None


class SimulateRequest(BaseModel):
    fixture: Optional[str] = None
    scenario: Optional[str] = None  # scenario source text
    dt: Optional[float] = None
    metrics: bool = True
    include_csv: bool = False


class MetricsOut(BaseModel):
    segment_start_s: float
    segment_end_s: float
    settling_time_s: Optional[float]
    steady_state_error_pct: float
    max_deviation_pct: float
    overshoot_pct: float


class SimulateResponse(BaseModel):
    name: str
    rows: int
    duration_s: float
    metrics: list[MetricsOut] = Field(default_factory=list)
    csv: Optional[str] = None


class TuneRequest(BaseModel):
    preset: Optional[str] = None
    mode: str = "pid"
    ku: Optional[float] = None
    pu_s: Optional[float] = None
    tol: float = 0.05
    kp_lo: Optional[float] = None
    kp_hi: Optional[float] = None


class TuneResponse(BaseModel):
    ku: float
    pu_s: float
    gains: dict[str, dict[str, float]]
    applied: dict[str, float]
    periods_used: Optional[int] = None
    period_std_s: Optional[float] = None


def snapshot_to_dict(snap: Snapshot) -> dict[str, Any]:
    """JSON-ready snapshot; unlimited speed encodes as null."""
    speed = snap.clock.speed
    return {
        "t_s": snap.t_s,
        "level_pct": snap.level_pct,
        "level_m": snap.level_m,
        "setpoint_pct": snap.setpoint_pct,
        "output_v": snap.output_v,
        "valve_frac": snap.valve_frac,
        "q_in": snap.q_in,
        "q_out": snap.q_out,
        "mode": snap.mode.value,
        "gains": {"kp": snap.gains.kp, "ki": snap.gains.ki, "kd": snap.gains.kd},
        "clock": {
            "speed": None if math.isinf(speed) else speed,
            "paused": snap.clock.paused,
        },
        "alarms": list(snap.alarms),
    }


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


# ----------------------------------------------------------------- fan-out


class _Hub:
    """Snapshot fan-out with per-client bounded drop-oldest queues."""

    def __init__(self) -> None:
        self.clients: set[asyncio.Queue[str]] = set()
        self._last_pub = -math.inf

    def register(self) -> asyncio.Queue[str]:
        q: asyncio.Queue[str] = asyncio.Queue(maxsize=SNAPSHOT_QUEUE_SIZE)
        self.clients.add(q)
        return q

    def unregister(self, q: asyncio.Queue[str]) -> None:
        self.clients.discard(q)

    def publish_from(self, session: SimSession, force: bool = False) -> None:
        """Snapshot the session and fan out, unless inside the throttle
        window; the snapshot is only built when it will be sent."""
        now = time.perf_counter()
        if not force and now - self._last_pub < SNAPSHOT_MIN_INTERVAL_S:
            return
        self._last_pub = now
        if not self.clients:
            return
        text = _dumps({"snapshot": snapshot_to_dict(session.snapshot())})
        for q in self.clients:
            try:
                q.put_nowait(text)
            except asyncio.QueueFull:
                with contextlib.suppress(asyncio.QueueEmpty):
                    q.get_nowait()
                with contextlib.suppress(asyncio.QueueFull):
                    q.put_nowait(text)


# ------------------------------------------------------------------- app


class _AppState:
    def __init__(self, session: SimSession) -> None:
        self.session = session
        self.hub = _Hub()
        self.run_event = asyncio.Event()
        self.stepper: asyncio.Task | None = None
        self.tune_task: asyncio.Task | None = None


def _hello_config(state: _AppState) -> dict[str, Any]:
    session = state.session
    speed = session.speed
    return {
        "loop": session.loop.to_dict(),
        "dt_s": session.loop.dt_s,
        "speed": None if math.isinf(speed) else speed,
        "paused": session.paused,
        "log_path": session.config.log_path,
    }


async def _tune_runner(state: _AppState) -> None:
    session = state.session
    loop = asyncio.get_running_loop()
    try:
        result = await loop.run_in_executor(None, session.tune_search)
    except TuningError as exc:
        session.finish_tune(error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # pragma: no cover - defensive
        session.finish_tune(error=f"internal: {exc}")
    else:
        session.finish_tune(result=result)
    state.hub.publish_from(session, force=True)


async def _apply(state: _AppState, command) -> int:
    """Apply one command on the loop thread and sync the pacer."""
    applied_at = state.session.apply_command(command)
    if isinstance(command, StartTune):
        state.tune_task = asyncio.create_task(_tune_runner(state))
    if state.session.paused:
        state.run_event.clear()
    else:
        state.run_event.set()
    state.hub.publish_from(state.session, force=True)
    return applied_at


async def _stepper(state: _AppState) -> None:
    session = state.session
    deadline: float | None = None
    unyielded = 0
    while not session.closed:
        if not state.run_event.is_set():
            deadline = None  # never burst to catch up across a pause
            await state.run_event.wait()
            continue
        try:
            session.tick()
        except SessionClosed:
            break
        state.hub.publish_from(session)
        speed = session.speed
        if math.isinf(speed):
            deadline = None
            unyielded += 1
            if unyielded >= _YIELD_EVERY:
                unyielded = 0
                await asyncio.sleep(0)
            continue
        now = time.perf_counter()
        if deadline is None:
            deadline = now
        deadline += session.loop.dt_s / speed
        delay = deadline - now
        if delay > 0:
            await asyncio.sleep(delay)
        elif delay < -0.5:
            deadline = now  # fell far behind; resync instead of bursting
        else:
            await asyncio.sleep(0)


def _run_simulation(req: SimulateRequest) -> SimulateResponse:
    if (req.fixture is None) == (req.scenario is None):
        raise HTTPException(422, "provide exactly one of fixture or scenario")
    try:
        if req.fixture is not None:
            scenario = load_fixture(req.fixture)
        else:
            scenario = parse_scenario(req.scenario)
        if req.dt is not None:
            scenario = dataclasses.replace(scenario, dt_s=req.dt)
    except KeyError as exc:
        raise HTTPException(404, str(exc.args[0])) from exc
    except (ScenarioSyntaxError, ScenarioValidationError, ValueError) as exc:
        raise HTTPException(422, str(exc)) from exc

    series = run_scenario(scenario)
    metrics: list[MetricsOut] = []
    if req.metrics:
        try:
            metrics = [
                MetricsOut(**dataclasses.asdict(m)) for m in compute_metrics(series)
            ]
        except SegmentTooShort:
            metrics = []
    return SimulateResponse(
        name=scenario.name,
        rows=len(series),
        duration_s=scenario.duration_s,
        metrics=metrics,
        csv=series.to_csv_text() if req.include_csv else None,
    )


def _run_tuning(req: TuneRequest) -> TuneResponse:
    try:
        mode = ControllerMode(req.mode)
    except ValueError:
        raise HTTPException(422, f"unknown mode {req.mode!r}") from None
    if mode is ControllerMode.ONOFF:
        raise HTTPException(422, "cannot tune the on-off mode")

    periods_used = None
    period_std = None
    if req.ku is not None and req.pu_s is not None:
        ku, pu = req.ku, req.pu_s
    elif req.preset is not None:
        try:
            loop = config_from_preset(req.preset).loop
            result = find_ultimate_gain(
                loop, kp_lo=req.kp_lo, kp_hi=req.kp_hi, tol=req.tol
            )
        except (ValueError, TuningError) as exc:
            raise HTTPException(422, f"{type(exc).__name__}: {exc}") from exc
        ku, pu = result.ku, result.pu_s
        periods_used = result.periods_used
        period_std = result.period_std_s
    else:
        raise HTTPException(422, "provide either ku and pu_s, or a preset")

    try:
        table = {
            rule_mode.value: dataclasses.asdict(zn_gains(rule_mode, ku, pu))
            for rule_mode in (
                ControllerMode.P,
                ControllerMode.PI,
                ControllerMode.PID,
                ControllerMode.PD,
            )
        }
        applied = dataclasses.asdict(zn_gains(mode, ku, pu))
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc
    return TuneResponse(
        ku=ku,
        pu_s=pu,
        gains=table,
        applied=applied,
        periods_used=periods_used,
        period_std_s=period_std,
    )


def create_app(
    config: SessionConfig | None = None, ui_dir: str | None = None
) -> FastAPI:
    """Build the service around one session (default: paper_default loop)."""
    if config is None:
        config = config_from_preset("paper_default")
    session = SimSession(config)
    state = _AppState(session)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        state.stepper = asyncio.create_task(_stepper(state))
        try:
            yield
        finally:
            for task in (state.stepper, state.tune_task):
                if task is not None:
                    task.cancel()
                    with contextlib.suppress(asyncio.CancelledError):
                        await task
            state.session.close()

    app = FastAPI(title="hydrolab", version=__version__, lifespan=lifespan)
    app.state.sim = state

    @app.get("/healthz")
    async def healthz() -> dict:
        snap = session.snapshot()
        return {
            "ok": not session.closed,
            "version": __version__,
            "protocol": PROTOCOL_VERSION,
            "t_s": snap.t_s,
            "paused": snap.clock.paused,
        }

    @app.get("/config")
    async def get_config() -> dict:
        return _hello_config(state)

    @app.get("/snapshot")
    async def get_snapshot() -> dict:
        return snapshot_to_dict(session.snapshot())

    @app.get("/presets")
    async def get_presets() -> list[str]:
        return list_presets()

    @app.get("/fixtures")
    async def get_fixtures() -> list[str]:
        return fixture_names()

    @app.post("/command")
    async def post_command(frame: CommandFrame) -> dict:
        try:
            command = parse_command(frame.cmd, frame.args)
            applied_at = await _apply(state, command)
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc
        except SessionClosed as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"cmd": command_name(command), "applied_at_step": applied_at}

    @app.post("/simulate")
    async def post_simulate(req: SimulateRequest) -> SimulateResponse:
        return await asyncio.get_running_loop().run_in_executor(
            None, _run_simulation, req
        )

    @app.post("/tune")
    async def post_tune(req: TuneRequest) -> TuneResponse:
        return await asyncio.get_running_loop().run_in_executor(
            None, _run_tuning, req
        )

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        await ws.send_text(
            _dumps(
                {
                    "hello": {
                        "version": PROTOCOL_VERSION,
                        "config": _hello_config(state),
                    }
                }
            )
        )
        queue = state.hub.register()

        async def pump() -> None:
            while True:
                await ws.send_text(await queue.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    frame = CommandFrame.model_validate_json(text)
                except ValueError:
                    await ws.send_text(
                        _dumps({"error": None, "message": "malformed command frame"})
                    )
                    continue
                try:
                    command = parse_command(frame.cmd, frame.args)
                    applied_at = await _apply(state, command)
                except ValidationError as exc:
                    await ws.send_text(
                        _dumps({"error": frame.id, "message": str(exc)})
                    )
                    continue
                except SessionClosed as exc:
                    await ws.send_text(
                        _dumps({"error": frame.id, "message": str(exc)})
                    )
                    break
                await ws.send_text(
                    _dumps({"ack": frame.id, "applied_at_step": applied_at})
                )
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender
            state.hub.unregister(queue)

    resolved_ui = ui_dir or os.environ.get("HYDROLAB_UI_DIR")
    if resolved_ui and os.path.isdir(resolved_ui):
        app.mount("/", StaticFiles(directory=resolved_ui, html=True), name="ui")

    return app
