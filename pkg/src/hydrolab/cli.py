"""Command-line front end; thin argument plumbing over the package API.

Exit codes: 0 success, 1 scenario parse or validation problems, 2 file
I/O problems, 3 tuning failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

from . import __version__
from .control import ControllerMode
from .presets import list_presets
from .scenario import (
    ScenarioSyntaxError,
    ScenarioValidationError,
    SegmentTooShort,
    TimeSeries,
    compute_metrics,
    fixture_names,
    load_fixture,
    parse_scenario,
    run_scenario,
)
from .session import ConfigError, config_from_preset
from .tuning import CLASSIC_RULES, TuningError, find_ultimate_gain, zn_gains_exact

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_TUNING = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _metrics_table(metrics) -> str:
    header = (
        f"{'segment':>7}  {'start_s':>9}  {'end_s':>9}  {'settling_s':>10}  "
        f"{'ss_err_pct':>10}  {'max_dev_pct':>11}  {'overshoot_pct':>13}"
    )
    lines = [header]
    for i, m in enumerate(metrics, start=1):
        settling = "-" if m.settling_time_s is None else f"{m.settling_time_s:.1f}"
        lines.append(
            f"{i:>7}  {m.segment_start_s:>9.1f}  {m.segment_end_s:>9.1f}  "
            f"{settling:>10}  {m.steady_state_error_pct:>10.3f}  "
            f"{m.max_deviation_pct:>11.3f}  {m.overshoot_pct:>13.3f}"
        )
    return "\n".join(lines)


def _gains_table(ku: float, pu_s: float) -> str:
    from fractions import Fraction

    lines = [
        f"ultimate gain Ku = {ku:.6g}",
        f"ultimate period Pu = {pu_s:.6g} s",
        "",
        f"{'rule':<20}{'Kp':>12}{'Ki':>14}{'Kd':>14}",
    ]
    ku_f, pu_f = Fraction(ku), Fraction(pu_s)
    for mode in (
        ControllerMode.P,
        ControllerMode.PI,
        ControllerMode.PID,
        ControllerMode.PD,
    ):
        label = CLASSIC_RULES.for_mode(mode).label
        kp, ki, kd = (float(x) for x in zn_gains_exact(mode, ku_f, pu_f))
        lines.append(f"{label:<20}{kp:>12.6g}{ki:>14.6g}{kd:>14.6g}")
    return "\n".join(lines)


def _cmd_simulate(args: argparse.Namespace) -> int:
    if (args.scenario is None) == (args.fixture is None):
        return _fail(EXIT_INVALID, "provide exactly one of --scenario or --fixture")
    try:
        if args.fixture is not None:
            scenario = load_fixture(args.fixture)
        else:
            with open(args.scenario, "r", encoding="utf-8") as f:
                text = f.read()
            scenario = parse_scenario(text)
        if args.dt is not None:
            scenario = dataclasses.replace(scenario, dt_s=args.dt)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read scenario: {exc}")
    except KeyError as exc:
        return _fail(EXIT_INVALID, str(exc.args[0]))
    except (ScenarioSyntaxError, ScenarioValidationError, ValueError) as exc:
        return _fail(EXIT_INVALID, str(exc))

    series = run_scenario(scenario)
    try:
        series.write_csv(args.out)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {args.out!r}: {exc}")
    print(f"{scenario.name}: {len(series)} rows -> {args.out}")

    if args.metrics:
        try:
            print(_metrics_table(compute_metrics(series, band_pct=args.band)))
        except SegmentTooShort as exc:
            return _fail(EXIT_INVALID, str(exc))
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    try:
        series = TimeSeries.read_csv(args.infile)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.infile!r}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        print(_metrics_table(compute_metrics(series, band_pct=args.band)))
    except (SegmentTooShort, ValueError) as exc:
        return _fail(EXIT_INVALID, str(exc))
    return EXIT_OK


def _cmd_tune(args: argparse.Namespace) -> int:
    have_pair = args.ku is not None and args.pu is not None
    if (args.ku is None) != (args.pu is None):
        return _fail(EXIT_INVALID, "--ku and --pu must be given together")
    if have_pair == (args.preset is not None):
        return _fail(EXIT_INVALID, "provide either --ku/--pu or --preset")

    if have_pair:
        ku, pu = args.ku, args.pu
        if ku <= 0 or pu <= 0:
            return _fail(EXIT_INVALID, "--ku and --pu must be > 0")
    else:
        if args.formulas_only:
            return _fail(EXIT_INVALID, "--formulas-only needs --ku and --pu")
        try:
            loop = config_from_preset(args.preset).loop
        except ConfigError as exc:
            return _fail(EXIT_INVALID, str(exc))
        try:
            result = find_ultimate_gain(loop, tol=args.tol)
        except TuningError as exc:
            return _fail(EXIT_TUNING, f"{type(exc).__name__}: {exc}")
        ku, pu = result.ku, result.pu_s
        print(
            f"search on {args.preset!r}: {result.periods_used} periods, "
            f"period spread {result.period_std_s:.3g} s, "
            f"decay ratio {result.decay_ratio:.3f}"
        )
    print(_gains_table(ku, pu))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    from .session import Start

    if args.speed in ("inf", "unlimited", "max"):
        speed = math.inf
    else:
        try:
            speed = float(args.speed)
        except ValueError:
            return _fail(EXIT_INVALID, f"bad --speed {args.speed!r}")
    try:
        config = config_from_preset(args.preset, log_path=args.log, speed=speed)
    except ConfigError as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        app = create_app(config, ui_dir=args.ui)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    if args.start:
        app.state.sim.session.apply_command(Start())
        app.state.sim.run_event.set()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrolab",
        description="Liquid-level control loop trainer: simulate, tune, serve.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario headless and write its CSV")
    sim.add_argument("--scenario", help="path to a scenario file")
    sim.add_argument(
        "--fixture",
        help=f"bundled scenario name (one of: {', '.join(fixture_names())})",
    )
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--dt", type=float, help="override the scenario step, seconds")
    sim.add_argument(
        "--metrics", action="store_true", help="print per-segment transient metrics"
    )
    sim.add_argument(
        "--band", type=float, default=2.0, help="settling band, percent of span"
    )
    sim.set_defaults(func=_cmd_simulate)

    met = sub.add_parser("metrics", help="compute transient metrics from a run CSV")
    met.add_argument("infile", help="CSV written by simulate or a live session")
    met.add_argument(
        "--band", type=float, default=2.0, help="settling band, percent of span"
    )
    met.set_defaults(func=_cmd_metrics)

    tune = sub.add_parser(
        "tune", help="print the tuning table from a search or from Ku and Pu"
    )
    tune.add_argument("--preset", help=f"loop preset (one of: {', '.join(list_presets())})")
    tune.add_argument("--ku", type=float, help="known ultimate gain")
    tune.add_argument("--pu", type=float, help="known ultimate period, seconds")
    tune.add_argument(
        "--formulas-only",
        action="store_true",
        help="skip the search; tabulate the rules at --ku/--pu",
    )
    tune.add_argument(
        "--tol", type=float, default=0.05, help="search decay-ratio tolerance"
    )
    tune.set_defaults(func=_cmd_tune)

    serve = sub.add_parser("serve", help="run the live session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--preset", default="paper_default")
    serve.add_argument(
        "--speed", default="1", help="clock multiplier, a number or 'inf'"
    )
    serve.add_argument("--log", help="session CSV log path")
    serve.add_argument("--ui", help="static operator console directory to mount")
    serve.add_argument(
        "--start", action="store_true", help="begin running instead of paused"
    )
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
