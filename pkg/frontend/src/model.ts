/**
 * Console-side session state.
 *
 * Everything displayed anywhere in the UI lives here, and every number in
 * here was copied verbatim out of a server frame: the model does no
 * physics, no integration, no prediction. Network events are funneled in
 * one at a time (there is a single thread of control), so no locking.
 */

import type { CommandArgs, CommandId, HelloConfig, Snapshot } from "./protocol.js";

export type Connection = "connecting" | "live" | "down";

/**
 * One trend sample. pv/sp are percent of span straight from the snapshot;
 * out is the controller output rescaled from volts to percent (the 0-10 V
 * output spans 0-100%), the only unit conversion in the console.
 */
export interface TrendPoint {
  t_s: number;
  pv: number;
  sp: number;
  out: number;
}

/** A contiguous run of samples; a new segment starts after every gap. */
export interface TrendSegment {
  points: TrendPoint[];
}

export type LedgerStatus = "pending" | "acked" | "rejected" | "lost";

export interface LedgerEntry {
  id: CommandId;
  cmd: string;
  args: CommandArgs;
  sentAtMs: number;
  status: LedgerStatus;
  /** Step index the server applied the command at (acked only). */
  step?: number;
  /** Server rejection text (rejected only). */
  message?: string;
}

export interface ModelOptions {
  /** Wall clock, milliseconds; injectable for tests. */
  now?: () => number;
  /** Max trend points across all segments; oldest evicted first. */
  trendCap?: number;
  /** Min wall-clock spacing between kept trend points (<= 10/s default). */
  subsampleMs?: number;
  /** Pending commands older than this surface as warnings. */
  ledgerTimeoutMs?: number;
  /** Resolved ledger entries kept for display. */
  ledgerKeep?: number;
}

export class ConsoleModel {
  connection: Connection = "connecting";
  hello: HelloConfig | null = null;
  latest: Snapshot | null = null;
  /** Messages worth showing the operator (protocol noise, stray errors). */
  notices: string[] = [];

  private readonly now: () => number;
  private readonly trendCap: number;
  private readonly subsampleMs: number;
  private readonly ledgerTimeoutMs: number;
  private readonly ledgerKeep: number;

  private segments: TrendSegment[] = [];
  private trendSize = 0;
  private lastKeptWallMs = -Infinity;
  private breakPending = false;

  private pending = new Map<CommandId, LedgerEntry>();
  private resolved: LedgerEntry[] = [];

  /** Bumped on every visible change; render loops compare and redraw. */
  revision = 0;

  constructor(opts: ModelOptions = {}) {
    this.now = opts.now ?? Date.now;
    this.trendCap = opts.trendCap ?? 4096;
    this.subsampleMs = opts.subsampleMs ?? 100;
    this.ledgerTimeoutMs = opts.ledgerTimeoutMs ?? 5000;
    this.ledgerKeep = opts.ledgerKeep ?? 20;
  }

  // ------------------------------------------------------ network events

  connecting(): void {
    this.connection = "connecting";
    this.revision++;
  }

  onHello(config: HelloConfig): void {
    this.hello = config;
    this.connection = "live";
    this.breakPending = true;
    this.revision++;
  }

  onSnapshot(snap: Snapshot): void {
    this.latest = snap;
    this.maybeKeepForTrend(snap);
    this.revision++;
  }

  onAck(id: CommandId, step: number): void {
    const entry = this.pending.get(id);
    if (!entry) return; // resolves exactly once; late or foreign acks ignored
    this.pending.delete(id);
    entry.status = "acked";
    entry.step = step;
    this.pushResolved(entry);
    this.revision++;
  }

  onReject(id: CommandId | null, message: string): void {
    if (id === null) {
      this.pushNotice(`server: ${message || "malformed frame"}`);
      this.revision++;
      return;
    }
    const entry = this.pending.get(id);
    if (!entry) return;
    this.pending.delete(id);
    entry.status = "rejected";
    entry.message = message;
    this.pushResolved(entry);
    this.revision++;
  }

  onDisconnect(): void {
    this.connection = "down";
    this.breakPending = true;
    for (const entry of this.pending.values()) {
      entry.status = "lost";
      entry.message = "connection lost before acknowledgement";
      this.pushResolved(entry);
    }
    this.pending.clear();
    this.revision++;
  }

  commandSent(id: CommandId, cmd: string, args: CommandArgs): void {
    this.pending.set(id, {
      id,
      cmd,
      args,
      sentAtMs: this.now(),
      status: "pending",
    });
    this.revision++;
  }

  // -------------------------------------------------------------- trend

  /**
   * Subsample on arrival time: at most one kept point per subsampleMs of
   * wall clock, so a fast stream cannot flood the buffer. The latest
   * readout above is updated on every snapshot regardless.
   */
  private maybeKeepForTrend(snap: Snapshot): void {
    const wall = this.now();
    if (wall - this.lastKeptWallMs < this.subsampleMs) return;
    this.lastKeptWallMs = wall;

    let seg = this.segments[this.segments.length - 1];
    const last = seg?.points[seg.points.length - 1];
    // a rewound clock means the server state was reset; break the trace
    const rewound = last !== undefined && snap.t_s < last.t_s;
    if (!seg || (this.breakPending && seg.points.length > 0) || rewound) {
      seg = { points: [] };
      this.segments.push(seg);
    }
    this.breakPending = false;

    seg.points.push({
      t_s: snap.t_s,
      pv: snap.level_pct,
      sp: snap.setpoint_pct,
      out: snap.output_v * 10, // 10 V full scale shown as 100%
    });
    this.trendSize++;
    while (this.trendSize > this.trendCap) {
      const head = this.segments[0];
      head.points.shift();
      this.trendSize--;
      if (head.points.length === 0) this.segments.shift();
    }
  }

  /** Trend segments, oldest first; render-only view, do not mutate. */
  trend(): readonly TrendSegment[] {
    return this.segments;
  }

  trendPointCount(): number {
    return this.trendSize;
  }

  // ------------------------------------------------------------- ledger

  /** Newest-first ledger for display: pending entries, then resolved. */
  ledger(): LedgerEntry[] {
    const rows = [...this.pending.values(), ...this.resolved];
    rows.sort((a, b) => b.sentAtMs - a.sentAtMs);
    return rows;
  }

  pendingCount(): number {
    return this.pending.size;
  }

  /** Unresolved commands older than the timeout; surfaced as warnings. */
  warnings(): LedgerEntry[] {
    const cutoff = this.now() - this.ledgerTimeoutMs;
    return [...this.pending.values()].filter((e) => e.sentAtMs <= cutoff);
  }

  alarms(): string[] {
    return this.latest ? this.latest.alarms : [];
  }

  private pushResolved(entry: LedgerEntry): void {
    this.resolved.push(entry);
    if (this.resolved.length > this.ledgerKeep) this.resolved.shift();
  }

  private pushNotice(text: string): void {
    this.notices.push(text);
    if (this.notices.length > 10) this.notices.shift();
  }
}
