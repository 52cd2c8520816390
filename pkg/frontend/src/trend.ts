/**
 * Strip-chart geometry for the trend view: PV, SP, and controller output
 * as percent against minutes, the classic operator chart.
 *
 * layoutTrend is pure (segments in, pixel coordinates out) so the whole
 * projection is testable without a canvas; drawTrend just paints a layout.
 * Segments never share a polyline, and every between-segment gap gets a
 * visible marker: missing data must look missing.
 */

import type { TrendSegment } from "./model.js";

export type SeriesName = "pv" | "sp" | "out";

export interface TrendLayoutOptions {
  width: number;
  height: number;
  /** Visible span in minutes. */
  windowMin: number;
  /** Rendered width of a data gap, as a fraction of the window. */
  gapFrac?: number;
}

export interface PixelPoint {
  x: number;
  y: number;
}

export interface Polyline {
  series: SeriesName;
  pts: PixelPoint[];
}

export interface Tick {
  pos: number;
  label: string;
}

export interface TrendLayout {
  polylines: Polyline[];
  /** x pixel positions marking connection/reset gaps. */
  gapMarkers: number[];
  xTicks: Tick[];
  yTicks: Tick[];
}

/** Fixed percent axis: 0 at the bottom edge, 100 at the top. */
export function yForPercent(value: number, height: number): number {
  const clamped = Math.min(100, Math.max(0, value));
  return height * (1 - clamped / 100);
}

export function layoutTrend(
  segments: readonly TrendSegment[],
  opts: TrendLayoutOptions,
): TrendLayout {
  const { width, height, windowMin } = opts;
  const windowS = windowMin * 60;
  const gapS = windowS * (opts.gapFrac ?? 0.02);

  // chart x is cumulative trace time: session time advances within a
  // segment, and each gap contributes a fixed rendered width no matter
  // how long the outage really was
  const xs: number[][] = [];
  const gapCenters: number[] = [];
  let cursor = 0;
  segments.forEach((seg, i) => {
    if (seg.points.length === 0) {
      xs.push([]);
      return;
    }
    if (i > 0) {
      gapCenters.push(cursor + gapS / 2);
      cursor += gapS;
    }
    const t0 = seg.points[0].t_s;
    xs.push(seg.points.map((p) => cursor + (p.t_s - t0)));
    cursor += seg.points[seg.points.length - 1].t_s - t0;
  });

  // strip-chart domain: fill left to right until the window is full,
  // then slide so the newest sample sits at the right edge
  const xEnd = Math.max(cursor, windowS);
  const x0 = xEnd - windowS;
  const toPx = (s: number) => ((s - x0) / windowS) * width;

  const polylines: Polyline[] = [];
  const series: { name: SeriesName; pick: (p: TrendSegment["points"][number]) => number }[] = [
    { name: "pv", pick: (p) => p.pv },
    { name: "sp", pick: (p) => p.sp },
    { name: "out", pick: (p) => p.out },
  ];
  segments.forEach((seg, i) => {
    if (seg.points.length === 0) return;
    for (const { name, pick } of series) {
      const pts: PixelPoint[] = [];
      seg.points.forEach((p, j) => {
        const x = toPx(xs[i][j]);
        if (x < -1) return; // scrolled off the left edge
        pts.push({ x, y: yForPercent(pick(p), height) });
      });
      if (pts.length > 0) polylines.push({ series: name, pts });
    }
  });

  const gapMarkers = gapCenters
    .map(toPx)
    .filter((x) => x >= 0 && x <= width);

  const xTicks: Tick[] = [];
  for (let k = 0; k <= 4; k++) {
    const s = x0 + (k * windowS) / 4;
    xTicks.push({ pos: (k * width) / 4, label: (s / 60).toFixed(1) });
  }
  const yTicks: Tick[] = [0, 25, 50, 75, 100].map((v) => ({
    pos: yForPercent(v, height),
    label: String(v),
  }));

  return { polylines, gapMarkers, xTicks, yTicks };
}

export const SERIES_COLORS: Record<SeriesName, string> = {
  pv: "#2f7ed8",
  sp: "#d84b2f",
  out: "#6a9955",
};

/** Paint a layout onto a 2D context. Pure presentation, nothing computed. */
export function drawTrend(ctx: CanvasRenderingContext2D, layout: TrendLayout, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);

  ctx.strokeStyle = "#d5d9de";
  ctx.fillStyle = "#697077";
  ctx.lineWidth = 1;
  ctx.font = "11px system-ui, sans-serif";
  for (const tick of layout.yTicks) {
    ctx.beginPath();
    ctx.moveTo(0, tick.pos);
    ctx.lineTo(width, tick.pos);
    ctx.stroke();
    ctx.fillText(tick.label, 4, Math.max(10, tick.pos - 3));
  }
  for (const tick of layout.xTicks) {
    ctx.fillText(tick.label, Math.min(tick.pos + 2, width - 28), height - 4);
  }

  for (const x of layout.gapMarkers) {
    ctx.save();
    ctx.strokeStyle = "#c2413b";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
    ctx.restore();
  }

  for (const line of layout.polylines) {
    ctx.strokeStyle = SERIES_COLORS[line.series];
    ctx.lineWidth = line.series === "sp" ? 1.25 : 1.75;
    ctx.beginPath();
    line.pts.forEach((p, i) => {
      if (i === 0) ctx.moveTo(p.x, p.y);
      else ctx.lineTo(p.x, p.y);
    });
    ctx.stroke();
  }
}
