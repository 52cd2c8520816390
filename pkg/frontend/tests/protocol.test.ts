import { describe, expect, it } from "vitest";

import {
  commandFrame,
  parseServerFrame,
  ProtocolError,
  validateCommand,
} from "../src/protocol.js";
import { makeSnapshot } from "./helpers.js";

describe("parseServerFrame", () => {
  it("reads a hello frame", () => {
    const ev = parseServerFrame(
      JSON.stringify({
        hello: {
          version: 1,
          config: { loop: {}, dt_s: 0.1, speed: null, paused: true, log_path: null },
        },
      }),
    );
    expect(ev.kind).toBe("hello");
    if (ev.kind === "hello") {
      expect(ev.version).toBe(1);
      expect(ev.config.dt_s).toBe(0.1);
      expect(ev.config.speed).toBeNull();
    }
  });

  it("reads a snapshot frame verbatim", () => {
    const snap = makeSnapshot({ t_s: 12.3, level_pct: 55.5 });
    const ev = parseServerFrame(JSON.stringify({ snapshot: snap }));
    expect(ev.kind).toBe("snapshot");
    if (ev.kind === "snapshot") {
      expect(ev.snapshot).toEqual(snap);
    }
  });

  it("reads ack and error frames", () => {
    expect(parseServerFrame('{"ack": 7, "applied_at_step": 41}')).toEqual({
      kind: "ack",
      id: 7,
      step: 41,
    });
    expect(parseServerFrame('{"error": 7, "message": "nope"}')).toEqual({
      kind: "reject",
      id: 7,
      message: "nope",
    });
    expect(parseServerFrame('{"error": null, "message": "malformed"}')).toEqual({
      kind: "reject",
      id: null,
      message: "malformed",
    });
  });

  it.each([
    "not json at all",
    "[1,2,3]",
    '{"mystery": 1}',
    '{"snapshot": {"t_s": "noon"}}',
    '{"ack": 7}',
    '{"snapshot": {"t_s": 1, "level_pct": 2, "level_m": 3, "setpoint_pct": 4, "output_v": 5, "valve_frac": 6, "q_in": 7, "q_out": 8, "mode": "pid", "gains": {"kp": 1, "ki": 2}, "clock": {"speed": 1, "paused": false}, "alarms": []}}',
  ])("rejects malformed frame %#", (text) => {
    expect(() => parseServerFrame(text)).toThrow(ProtocolError);
  });
});

describe("validateCommand", () => {
  it("accepts well-formed commands", () => {
    expect(validateCommand("start", {})).toBeNull();
    expect(validateCommand("pause", {})).toBeNull();
    expect(validateCommand("reset", {})).toBeNull();
    expect(validateCommand("set_setpoint", { pct: 50 })).toBeNull();
    expect(validateCommand("set_setpoint", { pct: 0 })).toBeNull();
    expect(validateCommand("set_setpoint", { pct: 100 })).toBeNull();
    expect(validateCommand("set_gains", { kp: 48, ki: 0, kd: 216 })).toBeNull();
    expect(validateCommand("set_mode", { mode: "pi" })).toBeNull();
    expect(validateCommand("set_onoff", { sp_pct: 70, hyst_pct: 10 })).toBeNull();
    expect(validateCommand("set_output_load", { fraction: 0.2 })).toBeNull();
    expect(validateCommand("set_input_limit", { fraction: 1 })).toBeNull();
    expect(validateCommand("set_speed", { multiplier: 240 })).toBeNull();
    expect(validateCommand("load_scenario", { name: "fig5a_p" })).toBeNull();
    expect(validateCommand("start_tune", {})).toBeNull();
    expect(validateCommand("start_tune", { mode: "pi", tol: 0.02 })).toBeNull();
  });

  it.each([
    ["set_setpoint", { pct: 120 }, "setpoint must be in [0, 100]"],
    ["set_setpoint", { pct: -1 }, "setpoint must be in [0, 100]"],
    ["set_setpoint", {}, "setpoint must be in [0, 100]"],
    ["set_gains", { kp: -1, ki: 0, kd: 0 }, "kp must be finite and >= 0"],
    ["set_gains", { kp: 1, ki: 0 }, "kd must be finite and >= 0"],
    ["set_mode", { mode: "fuzzy" }, "unknown mode"],
    ["set_onoff", { sp_pct: 70, hyst_pct: 0 }, "hysteresis_pct must be in (0, 100]"],
    ["set_onoff", { sp_pct: 101, hyst_pct: 5 }, "setpoint_pct must be in [0, 100]"],
    ["set_output_load", { fraction: 1.5 }, "outload must be in [0, 1]"],
    ["set_input_limit", { fraction: -0.1 }, "inlimit must be in [0, 1]"],
    ["set_speed", { multiplier: 0 }, "speed must be > 0"],
    ["set_speed", { multiplier: NaN }, "speed must be > 0"],
    ["load_scenario", { name: "" }, "non-empty"],
    ["start_tune", { mode: "onoff" }, "cannot tune the on-off mode"],
    ["start_tune", { tol: 1.5 }, "tol must be in (0, 1)"],
    ["open_pod_bay_doors", {}, "unknown command"],
  ] as const)("rejects %s %o", (cmd, args, fragment) => {
    const error = validateCommand(cmd, { ...args });
    expect(error).not.toBeNull();
    expect(error).toContain(fragment);
  });
});

describe("commandFrame", () => {
  it("serializes cmd, args, and id", () => {
    expect(JSON.parse(commandFrame("set_setpoint", { pct: 50 }, 3))).toEqual({
      cmd: "set_setpoint",
      args: { pct: 50 },
      id: 3,
    });
  });
});
