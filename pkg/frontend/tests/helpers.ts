import type { WireSocket } from "../src/client.js";
import type { HelloConfig, Snapshot } from "../src/protocol.js";

/** Deterministic wall clock the model and tests share. */
export class ManualClock {
  ms = 0;
  now = (): number => this.ms;
  tick(ms: number): void {
    this.ms += ms;
  }
}

export function makeHello(over: Partial<HelloConfig> = {}): HelloConfig {
  return {
    loop: { tank: { R: 2000 } },
    dt_s: 0.1,
    speed: 1,
    paused: false,
    log_path: null,
    ...over,
  };
}

export function makeSnapshot(over: Partial<Snapshot> = {}): Snapshot {
  return {
    t_s: 0,
    level_pct: 40,
    level_m: 0.27,
    setpoint_pct: 70,
    output_v: 5,
    valve_frac: 0.5,
    q_in: 2.5e-4,
    q_out: 2.0e-4,
    mode: "pid",
    gains: { kp: 48, ki: 2.6666666666666665, kd: 216 },
    clock: { speed: 1, paused: false },
    alarms: [],
    ...over,
  };
}

/** Scripted in-memory socket; tests drive open/receive/drop by hand. */
export class FakeSocket implements WireSocket {
  sent: string[] = [];
  closedByClient = false;
  onopen: ((ev: any) => void) | null = null;
  onmessage: ((ev: any) => void) | null = null;
  onclose: ((ev: any) => void) | null = null;
  onerror: ((ev: any) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closedByClient = true;
  }

  open(): void {
    this.onopen?.({});
  }

  receive(frame: object | string): void {
    const data = typeof frame === "string" ? frame : JSON.stringify(frame);
    this.onmessage?.({ data });
  }

  /** Server-side close (or network drop). */
  drop(): void {
    this.onclose?.({});
  }

  lastSent(): any {
    if (this.sent.length === 0) throw new Error("nothing sent");
    return JSON.parse(this.sent[this.sent.length - 1]);
  }
}

/** Socket factory that records every socket it hands out. */
export function fakeSockets(): { sockets: FakeSocket[]; factory: (url: string) => WireSocket } {
  const sockets: FakeSocket[] = [];
  return {
    sockets,
    factory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
  };
}

/** Manual timer queue standing in for setTimeout in reconnect tests. */
export class ManualTimers {
  private queue: (() => void)[] = [];

  set = (fn: () => void, _ms: number): unknown => {
    this.queue.push(fn);
    return fn;
  };

  clear = (handle: unknown): void => {
    this.queue = this.queue.filter((fn) => fn !== handle);
  };

  fire(): void {
    const pending = this.queue;
    this.queue = [];
    for (const fn of pending) fn();
  }

  get size(): number {
    return this.queue.length;
  }
}
