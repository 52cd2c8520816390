/**
 * Wire protocol spoken by the live session service on /ws.
 *
 * One JSON object per message. The server opens with a hello frame, then
 * streams snapshots; every client command carries an id and resolves to
 * exactly one ack or error frame. This module owns the frame shapes, the
 * incoming-frame parser, and the client-side copy of the command range
 * rules so bad input is caught before it is sent.
 */

export type CommandId = number | string;

export interface Snapshot {
  t_s: number;
  level_pct: number;
  level_m: number;
  setpoint_pct: number;
  output_v: number;
  valve_frac: number;
  q_in: number;
  q_out: number;
  mode: string;
  gains: { kp: number; ki: number; kd: number };
  clock: { speed: number | null; paused: boolean };
  alarms: string[];
}

export interface HelloConfig {
  loop: Record<string, unknown>;
  dt_s: number;
  speed: number | null;
  paused: boolean;
  log_path: string | null;
}

export type ServerEvent =
  | { kind: "hello"; version: number; config: HelloConfig }
  | { kind: "snapshot"; snapshot: Snapshot }
  | { kind: "ack"; id: CommandId; step: number }
  | { kind: "reject"; id: CommandId | null; message: string };

export class ProtocolError extends Error {}

const SNAPSHOT_NUMBER_FIELDS = [
  "t_s",
  "level_pct",
  "level_m",
  "setpoint_pct",
  "output_v",
  "valve_frac",
  "q_in",
  "q_out",
] as const;

function asRecord(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ProtocolError(`${what} is not an object`);
  }
  return value as Record<string, unknown>;
}

function checkSnapshot(value: unknown): Snapshot {
  const obj = asRecord(value, "snapshot");
  for (const field of SNAPSHOT_NUMBER_FIELDS) {
    if (typeof obj[field] !== "number") {
      throw new ProtocolError(`snapshot field ${field} is not a number`);
    }
  }
  if (typeof obj.mode !== "string") {
    throw new ProtocolError("snapshot field mode is not a string");
  }
  const gains = asRecord(obj.gains, "snapshot gains");
  for (const g of ["kp", "ki", "kd"]) {
    if (typeof gains[g] !== "number") {
      throw new ProtocolError(`snapshot gain ${g} is not a number`);
    }
  }
  const clock = asRecord(obj.clock, "snapshot clock");
  if (clock.speed !== null && typeof clock.speed !== "number") {
    throw new ProtocolError("snapshot clock speed is not a number or null");
  }
  if (!Array.isArray(obj.alarms)) {
    throw new ProtocolError("snapshot alarms is not an array");
  }
  return obj as unknown as Snapshot;
}

/** Parse one incoming frame; throws ProtocolError on anything unexpected. */
export function parseServerFrame(text: string): ServerEvent {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  const frame = asRecord(raw, "frame");

  if ("hello" in frame) {
    const hello = asRecord(frame.hello, "hello");
    const config = asRecord(hello.config, "hello config");
    if (typeof config.dt_s !== "number") {
      throw new ProtocolError("hello config dt_s is not a number");
    }
    return {
      kind: "hello",
      version: typeof hello.version === "number" ? hello.version : 0,
      config: config as unknown as HelloConfig,
    };
  }
  if ("snapshot" in frame) {
    return { kind: "snapshot", snapshot: checkSnapshot(frame.snapshot) };
  }
  if ("ack" in frame) {
    const id = frame.ack;
    if (typeof id !== "number" && typeof id !== "string") {
      throw new ProtocolError("ack id is not a number or string");
    }
    if (typeof frame.applied_at_step !== "number") {
      throw new ProtocolError("ack has no applied_at_step");
    }
    return { kind: "ack", id, step: frame.applied_at_step };
  }
  if ("error" in frame) {
    const id = frame.error;
    const okId = id === null || typeof id === "number" || typeof id === "string";
    if (!okId) {
      throw new ProtocolError("error id is not a number, string, or null");
    }
    return {
      kind: "reject",
      id: id as CommandId | null,
      message: typeof frame.message === "string" ? frame.message : "",
    };
  }
  throw new ProtocolError("unknown frame type");
}

// ------------------------------------------------------------- commands

export const MODES = ["onoff", "p", "pd", "pi", "pid"] as const;

export type CommandArgs = Record<string, number | string>;

function num(args: CommandArgs, key: string): number | null {
  const v = args[key];
  return typeof v === "number" && Number.isFinite(v) ? v : null;
}

/**
 * Client-side copy of the server's command validation. Returns an error
 * message, or null when the command is safe to send. Messages match the
 * server's wording so inline errors and rejections read the same.
 */
export function validateCommand(cmd: string, args: CommandArgs): string | null {
  switch (cmd) {
    case "start":
    case "pause":
    case "reset":
      return null;
    case "set_setpoint": {
      const pct = num(args, "pct");
      if (pct === null || pct < 0 || pct > 100) {
        return `setpoint must be in [0, 100], got ${args.pct}`;
      }
      return null;
    }
    case "set_gains": {
      for (const name of ["kp", "ki", "kd"]) {
        const v = num(args, name);
        if (v === null || v < 0) {
          return `${name} must be finite and >= 0, got ${args[name]}`;
        }
      }
      return null;
    }
    case "set_mode": {
      const mode = args.mode;
      if (typeof mode !== "string" || !MODES.includes(mode as never)) {
        return `unknown mode ${JSON.stringify(args.mode)}`;
      }
      return null;
    }
    case "set_onoff": {
      const sp = num(args, "sp_pct");
      if (sp === null || sp < 0 || sp > 100) {
        return "setpoint_pct must be in [0, 100]";
      }
      const hyst = num(args, "hyst_pct");
      if (hyst === null || hyst <= 0 || hyst > 100) {
        return "hysteresis_pct must be in (0, 100]";
      }
      return null;
    }
    case "set_output_load": {
      const f = num(args, "fraction");
      if (f === null || f < 0 || f > 1) {
        return `outload must be in [0, 1], got ${args.fraction}`;
      }
      return null;
    }
    case "set_input_limit": {
      const f = num(args, "fraction");
      if (f === null || f < 0 || f > 1) {
        return `inlimit must be in [0, 1], got ${args.fraction}`;
      }
      return null;
    }
    case "set_speed": {
      const m = num(args, "multiplier");
      if (m === null || m <= 0) {
        return `speed must be > 0, got ${args.multiplier}`;
      }
      return null;
    }
    case "load_scenario": {
      if (typeof args.name !== "string" || args.name.length === 0) {
        return "scenario name must be a non-empty string";
      }
      return null;
    }
    case "start_tune": {
      if (args.mode !== undefined) {
        if (args.mode === "onoff") return "cannot tune the on-off mode";
        if (typeof args.mode !== "string" || !MODES.includes(args.mode as never)) {
          return `unknown mode ${JSON.stringify(args.mode)}`;
        }
      }
      if (args.tol !== undefined) {
        const tol = num(args, "tol");
        if (tol === null || tol <= 0 || tol >= 1) {
          return `tol must be in (0, 1), got ${args.tol}`;
        }
      }
      return null;
    }
    default:
      return `unknown command ${JSON.stringify(cmd)}`;
  }
}

/** Serialize an outgoing command frame. */
export function commandFrame(cmd: string, args: CommandArgs, id: CommandId): string {
  return JSON.stringify({ cmd, args, id });
}
