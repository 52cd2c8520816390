/**
 * WebSocket client for the live session service.
 *
 * The socket construction is injected so tests (and the node integration
 * suite) can supply their own transport; the console itself passes the
 * browser WebSocket. All socket events funnel straight into the model in
 * arrival order. A dropped connection is retried forever at a fixed
 * interval until close() is called; the model shows the gap.
 */

import { ConsoleModel } from "./model.js";
import {
  commandFrame,
  parseServerFrame,
  ProtocolError,
  validateCommand,
  type CommandArgs,
} from "./protocol.js";

/**
 * The slice of the WebSocket API the client needs. Structural and loose
 * about event types on purpose: the browser WebSocket, the node `ws`
 * client, and the test fakes all satisfy it.
 */
export interface WireSocket {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => WireSocket;

export type SendResult = { ok: true; id: number } | { ok: false; error: string };

export interface ClientOptions {
  url: string;
  model: ConsoleModel;
  socketFactory: SocketFactory;
  /** Delay before a reconnect attempt, ms. */
  retryMs?: number;
  /** Timer hooks, injectable for tests. */
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export class ConsoleClient {
  private readonly url: string;
  private readonly model: ConsoleModel;
  private readonly factory: SocketFactory;
  private readonly retryMs: number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;

  private socket: WireSocket | null = null;
  private retryHandle: unknown = null;
  private closed = false;
  private nextId = 1;

  constructor(opts: ClientOptions) {
    this.url = opts.url;
    this.model = opts.model;
    this.factory = opts.socketFactory;
    this.retryMs = opts.retryMs ?? 1000;
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = opts.clearTimer ?? ((h) => clearTimeout(h as never));
  }

  connect(): void {
    if (this.closed || this.socket) return;
    this.model.connecting();
    const socket = this.factory(this.url);
    this.socket = socket;

    socket.onopen = () => {
      // connection state flips to live when the hello frame lands
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => {
      // the close event follows and carries the consequences
    };
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.model.onDisconnect();
      this.scheduleRetry();
    };
  }

  /** Validate, stamp an id, and send; nothing is sent on a local error. */
  send(cmd: string, args: CommandArgs = {}): SendResult {
    const error = validateCommand(cmd, args);
    if (error !== null) return { ok: false, error };
    if (!this.socket || this.model.connection !== "live") {
      return { ok: false, error: "not connected" };
    }
    const id = this.nextId++;
    this.socket.send(commandFrame(cmd, args, id));
    this.model.commandSent(id, cmd, args);
    return { ok: true, id };
  }

  close(): void {
    this.closed = true;
    if (this.retryHandle !== null) {
      this.clearTimer(this.retryHandle);
      this.retryHandle = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket) {
      socket.onclose = null;
      socket.close();
    }
  }

  private handleMessage(data: unknown): void {
    const text = typeof data === "string" ? data : String(data);
    let event;
    try {
      event = parseServerFrame(text);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.model.notices.push(`protocol: ${err.message}`);
        this.model.revision++;
        return;
      }
      throw err;
    }
    switch (event.kind) {
      case "hello":
        this.model.onHello(event.config);
        break;
      case "snapshot":
        this.model.onSnapshot(event.snapshot);
        break;
      case "ack":
        this.model.onAck(event.id, event.step);
        break;
      case "reject":
        this.model.onReject(event.id, event.message);
        break;
    }
  }

  private scheduleRetry(): void {
    if (this.closed || this.retryHandle !== null) return;
    this.retryHandle = this.setTimer(() => {
      this.retryHandle = null;
      this.connect();
    }, this.retryMs);
  }
}
