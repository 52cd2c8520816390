"""Ziegler-Nichols tuning: formula layer plus the automated Ku/Pu experiment.

The formula layer (zn_gains) is exact rational arithmetic over the classic
ultimate-gain rules.  The experiment layer closes a P-only loop around a
plant, perturbs it at equilibrium, classifies each run as decaying or
diverging from its measured peak-amplitude decay ratio, and bisects the
proportional gain until the oscillation is sustained.  A pure first-order
loop has no finite ultimate gain and is rejected upfront; oscillation needs
a phase-lag source (vane travel time and/or loop dead time).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from statistics import fmean, pstdev
from typing import Iterable, Sequence

from .control import ControllerMode, ControllerState, Gains, pid_step
from .plant import PlantState, loop_level_pct, plant_step
from .presets import LoopConfig


class TuningError(Exception):
    """Base class for everything the tuner can raise."""


class FlatSignal(TuningError):
    """Signal amplitude below the resolution threshold; nothing to measure."""


class TooFewCycles(TuningError):
    """Fewer than the minimum number of full oscillation cycles detected."""


class NoBracket(TuningError):
    """kp_lo does not decay or kp_hi does not diverge; bisection impossible."""


class NoConvergence(TuningError):
    """Bisection exhausted its iteration budget without a sustained run."""


class PureFirstOrderPlant(TuningError):
    """The loop has no phase-lag source, so no finite ultimate gain exists."""


# --------------------------------------------------------------- formulas


@dataclass(frozen=True)
class ZnRule:
    """One row of the ultimate-gain table: kp = c*Ku, Ti and Td as Pu
    multiples (None where the mode has no such term)."""

    label: str
    kp_over_ku: Fraction
    ti_over_pu: Fraction | None = None
    td_over_pu: Fraction | None = None


@dataclass(frozen=True)
class ZnRuleSet:
    """Per-mode tuning rules.  The PD row is the variant observed on the
    training rig (0.45*Ku), not the more common 0.8*Ku textbook rule."""

    p: ZnRule
    pi: ZnRule
    pid: ZnRule
    pd: ZnRule

    def for_mode(self, mode: ControllerMode) -> ZnRule:
        if mode is ControllerMode.P:
            return self.p
        if mode is ControllerMode.PI:
            return self.pi
        if mode is ControllerMode.PID:
            return self.pid
        if mode is ControllerMode.PD:
            return self.pd
        raise ValueError(f"no tuning rule for mode {mode!r}")


CLASSIC_RULES = ZnRuleSet(
    p=ZnRule("P", Fraction(1, 2)),
    pi=ZnRule("PI", Fraction(9, 20), ti_over_pu=Fraction(5, 6)),
    pid=ZnRule(
        "PID", Fraction(3, 5), ti_over_pu=Fraction(1, 2), td_over_pu=Fraction(1, 8)
    ),
    pd=ZnRule("PD (paper variant)", Fraction(9, 20), td_over_pu=Fraction(1, 8)),
)


def zn_gains_exact(
    mode: ControllerMode,
    ku: Fraction,
    pu: Fraction,
    rules: ZnRuleSet = CLASSIC_RULES,
) -> tuple[Fraction, Fraction, Fraction]:
    """(kp, ki, kd) as exact rationals; ki = kp/Ti, kd = kp*Td."""
    if ku <= 0 or pu <= 0:
        raise ValueError("ku and pu must be > 0")
    rule = rules.for_mode(mode)
    kp = ku * rule.kp_over_ku
    ki = kp / (pu * rule.ti_over_pu) if rule.ti_over_pu is not None else Fraction(0)
    kd = kp * pu * rule.td_over_pu if rule.td_over_pu is not None else Fraction(0)
    return kp, ki, kd


def zn_gains(mode: ControllerMode, ku: float, pu_s: float) -> Gains:
    """Ultimate-gain tuning rules applied without intermediate rounding.

    The arithmetic runs over exact rationals so table entries like
    kp=0.45*80=36 come out exactly, and 8/3 lands on the nearest float.
    """
    if not (math.isfinite(ku) and math.isfinite(pu_s)):
        raise ValueError("ku and pu_s must be finite")
    kp, ki, kd = zn_gains_exact(mode, Fraction(ku), Fraction(pu_s))
    return Gains(kp=float(kp), ki=float(ki), kd=float(kd))


# ----------------------------------------------------- oscillation metrics


@dataclass(frozen=True)
class OscillationStats:
    period_mean_s: float
    period_std_s: float
    decay_ratio: float
    n_periods: int


def _alternating_extrema(
    ys: Sequence[float], eps: float
) -> list[tuple[int, int]]:
    """Turning points as (index, kind), kind +1 for a max and -1 for a min,
    with zigzags smaller than eps merged away.  Kinds alternate."""
    raw: list[tuple[int, int]] = []
    direction = 0
    anchor = 0  # index where the latest strict move ended
    for i in range(1, len(ys)):
        if ys[i] == ys[i - 1]:
            continue
        d = 1 if ys[i] > ys[i - 1] else -1
        if direction == 0:
            direction = d
        elif d != direction:
            raw.append(((anchor + i - 1) // 2, direction))
            direction = d
        anchor = i

    out: list[tuple[int, int]] = []
    for p in raw:
        out.append(p)
        # collapse trailing sub-eps wiggles, keeping the more extreme point
        while len(out) >= 2 and abs(ys[out[-1][0]] - ys[out[-2][0]]) < eps:
            a = out.pop()
            out.pop()
            if out and a[1] == out[-1][1]:
                if a[1] * (ys[a[0]] - ys[out[-1][0]]) > 0:
                    out[-1] = a
    return out


def _upcrossing_times(
    ts: Sequence[float], ys: Sequence[float], ref: float, arm_band: float
) -> list[float]:
    """Times of positive-going crossings of ref, linearly interpolated.
    A crossing only counts after the signal has dipped below ref-arm_band,
    so ripple hugging the reference line is not counted."""
    times: list[float] = []
    armed = ys[0] <= ref - arm_band
    for i in range(1, len(ys)):
        if ys[i] <= ref - arm_band:
            armed = True
            continue
        if armed and ys[i - 1] < ref <= ys[i]:
            frac = (ref - ys[i - 1]) / (ys[i] - ys[i - 1])
            times.append(ts[i - 1] + frac * (ts[i] - ts[i - 1]))
            armed = False
    return times


def measure_oscillation(
    series: Iterable[tuple[float, float]],
    warmup_fraction: float = 0.3,
    flat_threshold: float = 1e-6,
) -> OscillationStats:
    """Period and decay statistics of an oscillating (t, pv) series.

    The first warmup_fraction of the horizon is discarded.  Periods come
    from successive positive-going crossings of the window midline, falling
    back to peak-to-peak intervals when fewer than 3 crossing periods
    exist.  The decay ratio is the mean ratio of successive peak
    amplitudes, each measured against the midpoint of its flanking troughs
    so a drifting baseline does not bias it.
    """
    pairs = list(series)
    if len(pairs) < 4:
        raise TooFewCycles(f"series has only {len(pairs)} samples")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValueError("warmup_fraction must be in [0, 1)")
    ts_all = [p[0] for p in pairs]
    if any(b <= a for a, b in zip(ts_all, ts_all[1:])):
        raise ValueError("series times must be strictly increasing")

    cutoff = ts_all[0] + warmup_fraction * (ts_all[-1] - ts_all[0])
    start = next(i for i, t in enumerate(ts_all) if t >= cutoff)
    ts = ts_all[start:]
    ys = [p[1] for p in pairs[start:]]
    if len(ys) < 4:
        raise TooFewCycles("warm-up discard left too few samples")

    lo, hi = min(ys), max(ys)
    p2p = hi - lo
    if p2p <= flat_threshold:
        raise FlatSignal(f"peak-to-peak {p2p:g} below threshold {flat_threshold:g}")

    eps = max(flat_threshold, 0.01 * p2p)
    ext = _alternating_extrema(ys, eps)
    midline = 0.5 * (hi + lo)
    crossings = _upcrossing_times(ts, ys, midline, 0.5 * eps)

    if len(crossings) >= 4:
        periods = [b - a for a, b in zip(crossings, crossings[1:])]
    else:
        peak_times = [ts[i] for i, kind in ext if kind == 1]
        periods = [b - a for a, b in zip(peak_times, peak_times[1:])]
    if len(periods) < 3:
        raise TooFewCycles(f"only {len(periods)} full periods detected")

    amps: list[float] = []
    for k in range(1, len(ext) - 1):
        idx, kind = ext[k]
        if kind != 1:
            continue
        flank = 0.5 * (ys[ext[k - 1][0]] + ys[ext[k + 1][0]])
        amps.append(ys[idx] - flank)
    ratios = [
        amps[i + 1] / amps[i] for i in range(len(amps) - 1) if amps[i] > 0
    ]
    if not ratios:
        raise TooFewCycles("not enough flanked peaks for a decay ratio")

    return OscillationStats(
        period_mean_s=fmean(periods),
        period_std_s=pstdev(periods),
        decay_ratio=fmean(ratios),
        n_periods=len(periods),
    )


# ------------------------------------------------------- probe loop plants


@dataclass(frozen=True)
class DelayedIntegratorLoop:
    """Idealized LTI probe plant K*e^(-L*s)/s in percent units.

    Unlike the tank loop this one is unclamped on both sides, which is what
    makes the analytic ultimate gain (pi/(2*K*L)) exactly attainable.
    """

    gain_per_s: float = 1.0
    delay_s: float = 1.0
    dt_s: float = 0.005

    def __post_init__(self) -> None:
        if self.gain_per_s <= 0:
            raise ValueError("gain_per_s must be > 0")
        if self.delay_s < 0:
            raise ValueError("delay_s must be >= 0")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be > 0")


@dataclass(frozen=True)
class UltimateGainResult:
    ku: float
    pu_s: float
    periods_used: int
    period_std_s: float
    decay_ratio: float

    def __post_init__(self) -> None:
        if self.ku <= 0 or self.pu_s <= 0:
            raise ValueError("ku and pu_s must be > 0")


_PERTURB_PCT = 2.0  # probe perturbation, percent of span
_MIN_PERIODS = 5


def _tank_equilibrium(
    loop: LoopConfig, kp: float, setpoint_pct: float
) -> tuple[float, float]:
    """Level and vane opening where the P-only loop is at rest.

    Inflow through the P law decreases with level while outflow increases,
    so the net-flow root is unique; plain bisection finds it.
    """
    sensor, tank, valve = loop.sensor, loop.tank, loop.valve
    span = sensor.h_span_m

    def opening_at(h: float) -> float:
        pv = min(max(100.0 * h / span, 0.0), 100.0)
        u_v = min(max(kp * (setpoint_pct - pv) / 10.0, 0.0), valve.v_max)
        target = (u_v - valve.v_min) / (valve.v_max - valve.v_min)
        return min(max(target, 0.0), 1.0)

    def net_flow(h: float) -> float:
        q_in = opening_at(h) * loop.inlet_limit * tank.q_in_max
        return q_in - tank.outflow_at(h, loop.load_fraction)

    lo, hi = 0.0, tank.h_max
    if net_flow(hi) >= 0.0:
        return hi, opening_at(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if net_flow(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    h_eq = 0.5 * (lo + hi)
    return h_eq, opening_at(h_eq)


def _probe_tank(
    loop: LoopConfig, kp: float, setpoint_pct: float, horizon_s: float
) -> tuple[list[tuple[float, float]], bool]:
    """Closed P-only loop from a perturbed equilibrium.

    Returns the (t, pv) series the controller saw.  The level and output
    are physically bounded, so a tank run never counts as blown up; a
    diverging oscillation here ends as a bounded rail-banging limit cycle
    and is classified by its measured decay ratio like any other run.
    """
    dt = loop.dt_s
    sensor = loop.sensor
    h_eq, opening_eq = _tank_equilibrium(loop, kp, setpoint_pct)

    dh = (_PERTURB_PCT / 100.0) * sensor.h_span_m
    h0 = h_eq + dh if h_eq + dh <= loop.tank.h_max else h_eq - dh
    state = PlantState(t=0.0, h=h0, valve_opening=opening_eq)
    pv_eq = min(max(100.0 * h_eq / sensor.h_span_m, 0.0), 100.0)

    n_delay = loop.deadtime_steps
    history: deque[float] = deque([pv_eq] * n_delay)
    gains = Gains(kp=kp)
    cstate = ControllerState()
    steps = max(round(horizon_s / dt), 1)
    series: list[tuple[float, float]] = []
    for k in range(steps):
        pv_now = loop_level_pct(state, sensor)
        if n_delay:
            history.append(pv_now)
            pv = history.popleft()
        else:
            pv = pv_now
        u_v, cstate = pid_step(
            gains, ControllerMode.P, setpoint_pct, pv, cstate, dt
        )
        series.append((k * dt, pv))
        state = plant_step(
            state,
            loop.tank,
            loop.valve,
            u_v,
            loop.inlet_limit,
            loop.load_fraction,
            dt,
        )
    return series, False


def _probe_integrator(
    plant: DelayedIntegratorLoop, kp: float, setpoint_pct: float, horizon_s: float
) -> tuple[list[tuple[float, float]], bool]:
    """Closed unclamped P loop around the delayed integrator.

    A run that strays far beyond the initial perturbation is cut short and
    flagged blown up; without actuator rails nothing else stops it from
    overflowing float range and poisoning the oscillation statistics.
    """
    dt = plant.dt_s
    n_delay = round(plant.delay_s / dt)
    steps = max(round(horizon_s / dt), 1)
    blowup = 100.0 * _PERTURB_PCT
    xs: list[float] = [setpoint_pct + _PERTURB_PCT]
    series: list[tuple[float, float]] = []
    for k in range(steps):
        pv = xs[k - n_delay] if k >= n_delay else setpoint_pct
        if abs(pv - setpoint_pct) > blowup:
            return series, True
        series.append((k * dt, pv))
        u_pct = kp * (setpoint_pct - pv)
        xs.append(xs[k] + plant.gain_per_s * u_pct * dt)
    return series, False


def _default_horizon(plant: LoopConfig | DelayedIntegratorLoop) -> float:
    """Long enough for a comfortable number of cycles past the warm-up.

    Tank probes also need several plant time constants: a rate-limited
    loop approaches its limit cycle on the tank's slow pole, and measuring
    the decay ratio before that settling is over mistakes a sustained
    oscillation for a decaying one.
    """
    if isinstance(plant, DelayedIntegratorLoop):
        pu_est = 4.0 * plant.delay_s
        return 25.0 * max(pu_est, 10.0 * plant.dt_s)
    lag = plant.deadtime_s + 0.5 * plant.valve.travel_time_s
    pu_est = 4.0 * max(lag, 2.0 * plant.dt_s)
    tau = plant.tank.resistance_R * plant.tank.capacitance_C
    return max(25.0 * pu_est, 6.0 * tau)


def find_ultimate_gain(
    plant: LoopConfig | DelayedIntegratorLoop,
    setpoint_pct: float = 50.0,
    kp_lo: float | None = None,
    kp_hi: float | None = None,
    tol: float = 0.05,
    max_iter: int = 40,
    horizon_s: float | None = None,
) -> UltimateGainResult:
    """Bisect the proportional gain to the edge of sustained oscillation.

    Probes run the closed loop from a perturbed equilibrium and are
    classified by decay ratio: < 1 decays, > 1 grows.  Endpoints must
    bracket (decay at kp_lo, divergence at kp_hi); when not given they
    are auto-expanded.
    Returns the gain whose run sustains (decay ratio within 1 +/- tol over
    at least 5 cycles) together with that run's period statistics.
    """
    if isinstance(plant, DelayedIntegratorLoop):
        if plant.delay_s <= 0:
            raise PureFirstOrderPlant(
                "integrator loop without delay cannot sustain oscillation"
            )
        probe = lambda kp, h: _probe_integrator(plant, kp, setpoint_pct, h)
    elif isinstance(plant, LoopConfig):
        if not plant.has_phase_lag():
            raise PureFirstOrderPlant(
                f"loop {plant.name!r} has no vane travel time and no dead time; "
                "a first-order loop under P control cannot sustain oscillation"
            )
        probe = lambda kp, h: _probe_tank(plant, kp, setpoint_pct, h)
    else:
        raise TypeError(f"unsupported plant type {type(plant).__name__}")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must be in (0, 1)")

    horizon = horizon_s if horizon_s is not None else _default_horizon(plant)

    def classify(kp: float) -> tuple[float, OscillationStats | None]:
        """Decay ratio (inf for a blown-up run) and stats when measurable.
        Doubles the horizon if a run shows cycles but fewer than the
        minimum count."""
        h = horizon
        stats = None
        # Guard against discrete-sampling chatter: a genuine limit cycle
        # has an amplitude on the scale of the perturbation and a period
        # resolvable at the probe step, while chatter from the controller
        # flipping across the quantized level step is microscopic and fast.
        amp_floor = 0.01 * _PERTURB_PCT
        for _ in range(3):
            series, blown_up = probe(kp, h)
            if blown_up:
                return math.inf, None
            try:
                stats = measure_oscillation(series, flat_threshold=amp_floor)
            except (FlatSignal, TooFewCycles):
                return 0.0, None
            if stats.period_mean_s < 4.0 * plant.dt_s:
                return 0.0, None
            if stats.n_periods >= _MIN_PERIODS:
                return stats.decay_ratio, stats
            h *= 2.0
        return stats.decay_ratio, None

    def as_result(kp: float, ratio: float, stats: OscillationStats | None):
        """An UltimateGainResult when the run counts as sustained."""
        if stats is None or not (1.0 - tol <= ratio <= 1.0 + tol):
            return None
        return UltimateGainResult(
            ku=kp,
            pu_s=stats.period_mean_s,
            periods_used=stats.n_periods,
            period_std_s=stats.period_std_s,
            decay_ratio=ratio,
        )

    explicit = kp_lo is not None and kp_hi is not None
    lo = kp_lo if kp_lo is not None else 0.5
    hi = kp_hi if kp_hi is not None else 8.0
    if lo <= 0 or hi <= lo:
        raise ValueError("need 0 < kp_lo < kp_hi")

    # Split decaying from sustaining runs a hair below ratio 1: a settled
    # limit cycle measures 1.0 +/- measurement noise, and a strict split at
    # exactly 1 would let that noise push the bracket past the onset gain.
    split = 1.0 - min(0.5 * tol, 0.01)

    ratio_lo, stats_lo = classify(lo)
    ratio_hi, stats_hi = classify(hi)

    if not explicit:
        expansions = 0
        while ratio_lo >= split and expansions < 12:
            lo /= 2.0
            ratio_lo, stats_lo = classify(lo)
            expansions += 1
        expansions = 0
        while ratio_hi < split and expansions < 12:
            hi *= 2.0
            ratio_hi, stats_hi = classify(hi)
            expansions += 1

    if ratio_lo >= split or ratio_hi < split:
        raise NoBracket(
            f"decay ratio {ratio_lo:.3g} at kp={lo:g} and {ratio_hi:.3g} at "
            f"kp={hi:g} do not bracket sustained oscillation"
        )

    # The answer is taken from the final bracket's edges, never from a
    # faraway early probe: a rail-banging limit cycle at a huge gain can
    # measure as perfectly sustained, but the ultimate gain is the point
    # where oscillation sets in, which is what the bracket converges to.
    cand_lo = as_result(lo, ratio_lo, stats_lo)
    cand_hi = as_result(hi, ratio_hi, stats_hi)

    def edge_pick():
        if cand_lo is not None and cand_hi is not None:
            lo_dist = abs(cand_lo.decay_ratio - 1.0)
            hi_dist = abs(cand_hi.decay_ratio - 1.0)
            return cand_lo if lo_dist <= hi_dist else cand_hi
        return cand_lo if cand_lo is not None else cand_hi

    for _ in range(max_iter):
        if (hi - lo) <= 0.005 * lo:
            picked = edge_pick()
            if picked is not None:
                return picked
        mid = math.sqrt(lo * hi)
        ratio, stats = classify(mid)
        if ratio < split:
            lo = mid
            cand_lo = as_result(mid, ratio, stats)
        else:
            hi = mid
            cand_hi = as_result(mid, ratio, stats)

    picked = edge_pick()
    if picked is not None:
        return picked
    raise NoConvergence(
        f"no sustained oscillation within {max_iter} bisection steps "
        f"(final bracket [{lo:g}, {hi:g}])"
    )
