/**
 * Browser entry point: builds the model and client, wires the widgets,
 * and repaints on a requestAnimationFrame loop whenever the model says
 * something changed. All state lives in the model; this file is DOM glue.
 */

import { ConsoleClient } from "./client.js";
import { ConsoleModel, type LedgerEntry } from "./model.js";
import { CONNECTION_LABELS, formatReadouts } from "./format.js";
import { drawTrend, layoutTrend } from "./trend.js";

const model = new ConsoleModel();
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new ConsoleClient({
  url: wsUrl,
  model,
  socketFactory: (url) => new WebSocket(url),
});

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("trend");
const ctx = canvas.getContext("2d")!;
const windowSelect = $<HTMLSelectElement>("window-select");
const connBadge = $("conn-badge");
const alarmBox = $("alarms");
const banner = $("banner");
const pvFill = $("pv-fill");
const ledgerList = $("ledger");

const READOUT_IDS = [
  "t",
  "level_pct",
  "level_m",
  "setpoint_pct",
  "output_v",
  "valve_frac",
  "q_in",
  "q_out",
  "mode",
  "kp",
  "ki",
  "kd",
  "speed",
  "clock",
] as const;

// forms whose inline error / revert behavior tracks the command outcome
interface TrackedForm {
  err: HTMLElement;
  revert: () => void;
}
const inflight = new Map<number | string, TrackedForm>();

function sendFromForm(cmd: string, args: Record<string, number | string>, err: HTMLElement, revert: () => void): void {
  const res = client.send(cmd, args);
  if (!res.ok) {
    err.textContent = res.error;
    return;
  }
  err.textContent = "";
  inflight.set(res.id, { err, revert });
}

function numInput(id: string): number {
  return parseFloat($<HTMLInputElement>(id).value);
}

$<HTMLFormElement>("sp-form").addEventListener("submit", (e) => {
  e.preventDefault();
  sendFromForm("set_setpoint", { pct: numInput("sp-input") }, $("sp-error"), () => {
    if (model.latest) $<HTMLInputElement>("sp-input").value = String(model.latest.setpoint_pct);
  });
});

$<HTMLFormElement>("gains-form").addEventListener("submit", (e) => {
  e.preventDefault();
  const args = { kp: numInput("kp-input"), ki: numInput("ki-input"), kd: numInput("kd-input") };
  sendFromForm("set_gains", args, $("gains-error"), () => {
    const g = model.latest?.gains;
    if (!g) return;
    $<HTMLInputElement>("kp-input").value = String(g.kp);
    $<HTMLInputElement>("ki-input").value = String(g.ki);
    $<HTMLInputElement>("kd-input").value = String(g.kd);
  });
});

$<HTMLFormElement>("mode-form").addEventListener("submit", (e) => {
  e.preventDefault();
  sendFromForm("set_mode", { mode: $<HTMLSelectElement>("mode-select").value }, $("mode-error"), () => {});
});

$<HTMLFormElement>("onoff-form").addEventListener("submit", (e) => {
  e.preventDefault();
  const args = { sp_pct: numInput("onoff-sp-input"), hyst_pct: numInput("onoff-hyst-input") };
  sendFromForm("set_onoff", args, $("onoff-error"), () => {});
});

$<HTMLFormElement>("scenario-form").addEventListener("submit", (e) => {
  e.preventDefault();
  const name = $<HTMLInputElement>("scenario-input").value.trim();
  sendFromForm("load_scenario", { name }, $("scenario-error"), () => {});
});

$("btn-start").addEventListener("click", () => client.send("start"));
$("btn-pause").addEventListener("click", () => client.send("pause"));
$("btn-reset").addEventListener("click", () => client.send("reset"));
$("btn-tune").addEventListener("click", () => {
  sendFromForm("start_tune", {}, $("tune-error"), () => {});
});

$<HTMLSelectElement>("speed-select").addEventListener("change", (e) => {
  client.send("set_speed", { multiplier: parseFloat((e.target as HTMLSelectElement).value) });
});

// manual vanes are live-drag, throttled to stay well under the snapshot rate
function bindSlider(id: string, cmd: string): void {
  const el = $<HTMLInputElement>(id);
  let timer: number | null = null;
  el.addEventListener("input", () => {
    if (timer !== null) return;
    timer = window.setTimeout(() => {
      timer = null;
      client.send(cmd, { fraction: parseFloat(el.value) });
    }, 150);
  });
}
bindSlider("outload-slider", "set_output_load");
bindSlider("inlimit-slider", "set_input_limit");

function ledgerRow(entry: LedgerEntry, stale: boolean): HTMLLIElement {
  const li = document.createElement("li");
  li.className = `ledger-${entry.status}${stale ? " ledger-stale" : ""}`;
  const argText = Object.entries(entry.args)
    .map(([k, v]) => `${k}=${v}`)
    .join(" ");
  let outcome = "";
  if (entry.status === "pending") outcome = stale ? "no reply yet" : "…";
  else if (entry.status === "acked") outcome = `step ${entry.step}`;
  else if (entry.status === "rejected") outcome = entry.message ?? "rejected";
  else outcome = entry.message ?? "lost";
  li.textContent = `${entry.cmd} ${argText} → ${outcome}`;
  return li;
}

function render(): void {
  const ro = formatReadouts(model);
  for (const id of READOUT_IDS) {
    $(`ro-${id}`).textContent = ro[id];
  }

  connBadge.textContent = CONNECTION_LABELS[model.connection];
  connBadge.className = `badge badge-${model.connection}`;
  banner.hidden = model.connection === "live";

  const alarms = model.alarms();
  alarmBox.textContent = alarms.length ? `alarms: ${ro.alarms}` : "";
  alarmBox.hidden = alarms.length === 0;
  $<HTMLButtonElement>("btn-tune").toggleAttribute("disabled", alarms.includes("tuning"));

  // the bar displays level_pct directly as a percentage height
  if (model.latest) {
    pvFill.style.height = `${Math.min(100, Math.max(0, model.latest.level_pct))}%`;
  }

  const warnings = new Set(model.warnings().map((w) => w.id));
  ledgerList.replaceChildren(...model.ledger().slice(0, 12).map((e) => ledgerRow(e, warnings.has(e.id))));

  for (const [id, tracked] of [...inflight]) {
    const entry = model.ledger().find((e) => e.id === id);
    if (!entry || entry.status === "pending") continue;
    if (entry.status === "rejected" || entry.status === "lost") {
      tracked.err.textContent = entry.message ?? "rejected";
      tracked.revert();
    }
    inflight.delete(id);
  }

  const width = canvas.clientWidth;
  const height = canvas.clientHeight;
  if (canvas.width !== width || canvas.height !== height) {
    canvas.width = width;
    canvas.height = height;
  }
  const layout = layoutTrend(model.trend(), {
    width,
    height,
    windowMin: parseFloat(windowSelect.value),
  });
  drawTrend(ctx, layout, width, height);
}

let paintedRevision = -1;
let paintedWindow = "";
function frame(): void {
  if (model.revision !== paintedRevision || windowSelect.value !== paintedWindow) {
    paintedRevision = model.revision;
    paintedWindow = windowSelect.value;
    render();
  }
  requestAnimationFrame(frame);
}

client.connect();
requestAnimationFrame(frame);
