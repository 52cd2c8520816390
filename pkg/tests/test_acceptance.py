"""Acceptance gate: one test and one printed pass/fail line per criterion.

Each criterion is checked at its stated tolerance and runtime budget.
Run with `pytest tests/test_acceptance.py -s` to see every line.
"""

import math
import time
from fractions import Fraction

from hydrolab.control import ControllerMode
from hydrolab.plant import PlantState, linearized_model, plant_step
from hydrolab.presets import get_preset
from hydrolab.scenario import (
    Row,
    TimeSeries,
    compute_metrics,
    fixture_names,
    load_fixture,
    parse_scenario,
    run_scenario,
    serialize_scenario,
)
from hydrolab.session import (
    LoadScenario,
    SessionConfig,
    SetSetpoint,
    SetSpeed,
    SimSession,
    Start,
)
from hydrolab.tuning import DelayedIntegratorLoop, find_ultimate_gain, zn_gains

# Frozen oracle values for the ultimate-gain criterion, computed by an
# independent frequency scan of the loop transfer functions (phase
# crossing at -180 degrees) before the search existed.
FOPDT_KU = 8.502424988445018
FOPDT_PU_S = 7.441522726018012
INTEGRATOR_KU = math.pi / 2
INTEGRATOR_PU_S = 4.0


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def test_zn_formula_reproduction():
    expected = {
        ControllerMode.P: (40.0, 0.0, 0.0),
        ControllerMode.PD: (36.0, 0.0, 162.0),
        ControllerMode.PI: (36.0, 1.2, 0.0),
        ControllerMode.PID: (48.0, float(Fraction(8, 3)), 216.0),
    }
    zn_gains(ControllerMode.P, 80.0, 36.0)  # warm-up outside the clock
    t0 = time.perf_counter()
    got = {m: zn_gains(m, 80.0, 36.0) for m in expected}
    elapsed = time.perf_counter() - t0
    exact = all(
        (g.kp, g.ki, g.kd) == expected[m] for m, g in got.items()
    )
    report(
        "zn-formula-reproduction",
        exact and elapsed < 1e-3,
        f"four rules at Ku=80, Pu=36 exact={exact}, {elapsed * 1e6:.0f} us",
    )


def test_plant_fidelity():
    t0 = time.perf_counter()
    loop = get_preset("paper_default")
    model = linearized_model(loop.tank, output="level")
    dt = 0.1
    state = PlantState(valve_opening=1.0)  # valve held open from t=0
    checkpoints = {round(k * model.tau / dt): k * model.tau for k in (1, 2, 3)}
    worst = 0.0
    for step in range(1, max(checkpoints) + 1):
        state = plant_step(state, loop.tank, loop.valve, 10.0, 1.0, 1.0, dt)
        if step in checkpoints:
            analytic = model.gain_K * loop.tank.q_in_max * (
                1.0 - math.exp(-checkpoints[step] / model.tau)
            )
            worst = max(worst, abs(state.h - analytic) / analytic)
    elapsed = time.perf_counter() - t0
    report(
        "plant-fidelity",
        worst < 1e-3 and elapsed < 1.0,
        f"step response at tau,2tau,3tau worst rel err {worst:.2e} "
        f"(limit 1e-3), {elapsed:.2f}s",
    )


def test_mass_balance_over_fixture_suite():
    t0 = time.perf_counter()
    worst_ratio = 0.0
    worst_name = ""
    for name in fixture_names():
        scenario = load_fixture(name)
        session = SimSession(SessionConfig(loop=scenario.resolve_loop()))
        session.apply_command(LoadScenario(name))
        loop = session.loop
        session.apply_command(Start())
        for _ in range(scenario.n_steps):
            session.tick()
        state = session.plant_state
        session.close()
        assert not state.overflowed and not state.underflowed, (
            f"{name} saturated; fixtures must stay in the linear regime"
        )
        residual = abs(
            loop.tank.capacitance_C * (state.h - loop.init_level_m)
            - (state.v_in - state.v_out)
        )
        limit = 1e-8 * scenario.duration_s
        ratio = residual / limit
        if ratio > worst_ratio:
            worst_ratio, worst_name = ratio, name
    elapsed = time.perf_counter() - t0
    report(
        "mass-balance",
        worst_ratio < 1.0 and elapsed < 5.0,
        f"{len(fixture_names())} fixtures, worst residual "
        f"{worst_ratio:.1e} of the 1e-8*horizon budget ({worst_name}), "
        f"{elapsed:.2f}s (limit 5s)",
    )


def test_offset_property():
    t0 = time.perf_counter()
    errors = {}
    for name, mode in (
        ("fig5a_p", "p"),
        ("fig5b_pd", "pd"),
        ("fig5c_pi", "pi"),
        ("fig5d_pid", "pid"),
    ):
        series = run_scenario(load_fixture(name))
        final = compute_metrics(series)[-1]
        errors[mode] = abs(final.steady_state_error_pct)
    elapsed = time.perf_counter() - t0
    ok = (
        errors["p"] > 0.5
        and errors["pd"] > 0.5
        and errors["pi"] < 0.5
        and errors["pid"] < 0.5
        and elapsed < 10.0
    )
    report(
        "offset-property",
        ok,
        "steady-state |error| pct "
        + ", ".join(f"{m}={e:.3f}" for m, e in errors.items())
        + f" (P, PD above 0.5; PI, PID below 0.5), {elapsed:.2f}s",
    )


def test_ultimate_gain_oracle():
    t0 = time.perf_counter()
    fopdt = find_ultimate_gain(get_preset("fopdt_test"))
    integrator = find_ultimate_gain(DelayedIntegratorLoop(1.0, 1.0, 0.005))
    elapsed = time.perf_counter() - t0
    errs = {
        "fopdt ku": abs(fopdt.ku - FOPDT_KU) / FOPDT_KU,
        "fopdt pu": abs(fopdt.pu_s - FOPDT_PU_S) / FOPDT_PU_S,
        "integrator ku": abs(integrator.ku - INTEGRATOR_KU) / INTEGRATOR_KU,
        "integrator pu": abs(integrator.pu_s - INTEGRATOR_PU_S) / INTEGRATOR_PU_S,
    }
    worst = max(errs.values())
    report(
        "ultimate-gain-oracle",
        worst < 0.05 and elapsed < 30.0,
        f"worst oracle error {worst:.2%} (limit 5%) over "
        + ", ".join(f"{k} {v:.2%}" for k, v in errs.items())
        + f", {elapsed:.1f}s (limit 30s)",
    )


def test_onoff_behavior():
    t0 = time.perf_counter()

    # slow valve: the band is overshot on both sides but the cycle is bounded
    scn = load_fixture("sec51_onoff")
    loop = scn.resolve_loop()
    sp, hyst = loop.onoff.setpoint_pct, loop.onoff.hysteresis_pct
    pv = run_scenario(scn).column("level_pct")
    entry = next(i for i, v in enumerate(pv) if v >= sp)
    cycle = pv[entry:]
    overshoot = max(cycle) - sp
    undershoot = (sp - hyst) - min(cycle)
    slow_ok = 0.0 < overshoot < hyst and undershoot < hyst

    # instant valve: trajectory stays inside the band give or take the
    # level change one step of full flow can produce
    text = (
        'scenario "onoff instant valve"\n'
        "plant paper_no_delay\n"
        "control onoff sp=70 hyst=10\n"
        "run duration=1300s dt=0.1s\n"
    )
    scn2 = parse_scenario(text)
    loop2 = scn2.resolve_loop()
    tank, sensor = loop2.tank, loop2.sensor
    step_flow_pct = (
        tank.q_in_max / tank.capacitance_C / sensor.h_span_m * 100.0 * loop2.dt_s
    )
    pv2 = run_scenario(scn2).column("level_pct")
    entry2 = next(i for i, v in enumerate(pv2) if v >= 70.0)
    band = pv2[entry2:]
    fast_ok = (
        max(band) <= 70.0 + step_flow_pct
        and min(band) >= 60.0 - step_flow_pct
    )
    elapsed = time.perf_counter() - t0
    report(
        "onoff-behavior",
        slow_ok and fast_ok and elapsed < 5.0,
        f"slow valve overshoot +{overshoot:.2f}pct, undershoot "
        f"-{undershoot:.2f}pct (bounded by band width {hyst}); instant valve "
        f"within band +/- {step_flow_pct:.3f}pct, {elapsed:.2f}s",
    )


def test_determinism_and_formats(tmp_path):
    t0 = time.perf_counter()

    round_trips = all(
        parse_scenario(serialize_scenario(load_fixture(n))) == load_fixture(n)
        for n in fixture_names()
    )

    scn = load_fixture("fig6b_sp_50_60")
    repeat_identical = (
        run_scenario(scn).to_csv_text() == run_scenario(scn).to_csv_text()
    )

    logs = []
    for speed in (1.0, 360.0, math.inf):
        path = tmp_path / f"speed_{speed}.csv"
        session = SimSession(
            SessionConfig(loop=scn.resolve_loop(), log_path=str(path), speed=speed)
        )
        session.apply_command(Start())
        for k in range(600):
            if k == 150:
                session.apply_command(SetSetpoint(64.0))
            if k == 300:
                session.apply_command(SetSpeed(7.0))
            session.tick()
        session.close()
        logs.append(path.read_bytes())
    speed_independent = logs[0] == logs[1] == logs[2]

    elapsed = time.perf_counter() - t0
    report(
        "determinism-and-formats",
        round_trips and repeat_identical and speed_independent and elapsed < 10.0,
        f"fixture round-trips={round_trips}, repeated runs byte-identical="
        f"{repeat_identical}, replay across speeds byte-identical="
        f"{speed_independent}, {elapsed:.2f}s (limit 10s)",
    )


def test_metrics_oracle():
    t0 = time.perf_counter()
    tau, amplitude, sp, dt = 100.0, 100.0, 50.0, 0.1
    rows = []
    for k in range(20000):
        t = (k + 1) * dt
        pv = sp - amplitude * math.exp(-t / tau)
        rows.append(Row(t, 0.0, pv, sp, sp - pv, 0.0, 0.0, 0.0, 0.0, "pid"))
    series = TimeSeries(rows=tuple(rows))
    got = compute_metrics(series)[0].settling_time_s
    expected = tau * math.log(amplitude / 2.0)  # leaves the 2pct band here
    elapsed = time.perf_counter() - t0
    ok = got is not None and abs(got - expected) <= dt + 1e-9 and elapsed < 1.0
    report(
        "metrics-oracle",
        ok,
        f"settling {got:.2f}s vs tau*ln(50)={expected:.2f}s "
        f"(within one dt={dt}), {elapsed:.2f}s",
    )
