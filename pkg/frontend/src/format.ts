/**
 * Readout strings for the console widgets.
 *
 * Formatting only: every string is one snapshot field passed through a
 * number formatter. No field is combined with another, nothing is
 * integrated or differentiated, and missing data renders as a dash so a
 * stale value can never masquerade as a live one.
 */

import type { ConsoleModel } from "./model.js";
import type { Snapshot } from "./protocol.js";

const DASH = "—";

/** Seconds, one decimal; the clock readout. */
export function fmtSeconds(t: number): string {
  return `${t.toFixed(1)} s`;
}

export function fmtPercent(v: number): string {
  return v.toFixed(2);
}

/** Small flows read best in engineering notation. */
export function fmtFlow(v: number): string {
  return v.toExponential(3);
}

export function fmtGain(v: number): string {
  // trim trailing zeros without losing odd tunings like 2.6667
  const s = v.toFixed(4);
  return s.replace(/\.?0+$/, "") || "0";
}

export interface Readouts {
  t: string;
  level_pct: string;
  level_m: string;
  setpoint_pct: string;
  output_v: string;
  valve_frac: string;
  q_in: string;
  q_out: string;
  mode: string;
  kp: string;
  ki: string;
  kd: string;
  speed: string;
  clock: string;
  alarms: string;
}

const EMPTY: Readouts = {
  t: DASH,
  level_pct: DASH,
  level_m: DASH,
  setpoint_pct: DASH,
  output_v: DASH,
  valve_frac: DASH,
  q_in: DASH,
  q_out: DASH,
  mode: DASH,
  kp: DASH,
  ki: DASH,
  kd: DASH,
  speed: DASH,
  clock: DASH,
  alarms: "",
};

export function snapshotReadouts(snap: Snapshot): Readouts {
  return {
    t: fmtSeconds(snap.t_s),
    level_pct: fmtPercent(snap.level_pct),
    level_m: snap.level_m.toFixed(4),
    setpoint_pct: fmtPercent(snap.setpoint_pct),
    output_v: snap.output_v.toFixed(3),
    valve_frac: snap.valve_frac.toFixed(3),
    q_in: fmtFlow(snap.q_in),
    q_out: fmtFlow(snap.q_out),
    mode: snap.mode.toUpperCase(),
    kp: fmtGain(snap.gains.kp),
    ki: fmtGain(snap.gains.ki),
    kd: fmtGain(snap.gains.kd),
    speed: snap.clock.speed === null ? "unlimited" : `${fmtGain(snap.clock.speed)}x`,
    clock: snap.clock.paused ? "paused" : "running",
    alarms: snap.alarms.join(", "),
  };
}

/** The full readout panel; dashes until the first snapshot arrives. */
export function formatReadouts(model: ConsoleModel): Readouts {
  return model.latest ? snapshotReadouts(model.latest) : EMPTY;
}

export const CONNECTION_LABELS = {
  connecting: "connecting…",
  live: "live",
  down: "disconnected, retrying…",
} as const;
