/** SVG figure rendering for the four simulator CSV contracts.
 *
 * Each figure kind is bound to one documented CSV header; a mismatched
 * header fails with a message naming the expected columns. Rendering is a
 * pure function of the CSV text and options, so reruns are idempotent.
 */

import { distinct, numericColumn, parseCsv, requireColumns, Table } from "./csv.js";

export type FigureKind =
  | "profile"
  | "outage-vs-sigmax"
  | "outage-vs-margin"
  | "rate-cdf";

export const FIGURE_KINDS: readonly FigureKind[] = [
  "profile",
  "outage-vs-sigmax",
  "outage-vs-margin",
  "rate-cdf",
];

export const CONTRACTS: Record<FigureKind, readonly string[]> = {
  profile: ["method", "x1", "mean", "lower", "upper", "truth"],
  "outage-vs-sigmax": [
    "method",
    "sigma_x",
    "outage_prob",
    "ci_low",
    "ci_high",
    "n_samples",
  ],
  "outage-vs-margin": ["method", "sigma_x", "sigma_delta", "outage_prob"],
  "rate-cdf": ["method", "rate", "cum_prob"],
};

export interface FigureOptions {
  /** Outage target drawn as a reference line on outage figures. */
  pout?: number;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

type Point = [number, number];

interface Series {
  label: string;
  color: string;
  points: Point[];
  markers?: boolean;
  dash?: string;
  /** Vertical interval per point: [x, low, high]. */
  intervals?: Array<[number, number, number]>;
}

interface Band {
  color: string;
  upper: Point[];
  lower: Point[];
}

interface Chart {
  xLabel: string;
  yLabel: string;
  logY: boolean;
  series: Series[];
  bands: Band[];
  refY?: { value: number; label: string };
}

/** Render one figure kind from CSV text to a standalone SVG document. */
export function renderFigure(
  kind: FigureKind,
  csvText: string,
  options: FigureOptions = {},
): string {
  const table = parseCsv(csvText);
  requireColumns(table, CONTRACTS[kind], `figure kind ${kind}`);
  const chart = buildChart(kind, table, options.pout ?? 1e-3);
  return drawChart(chart, options.width ?? 640, options.height ?? 420);
}

function buildChart(kind: FigureKind, table: Table, pout: number): Chart {
  switch (kind) {
    case "profile":
      return profileChart(table);
    case "outage-vs-sigmax":
      return outageVsSigmaXChart(table, pout);
    case "outage-vs-margin":
      return outageVsMarginChart(table, pout);
    case "rate-cdf":
      return rateCdfChart(table);
  }
}

function rowsByKey(table: Table, key: (row: Record<string, string>) => string) {
  const groups = new Map<string, Record<string, string>[]>();
  for (const row of table.rows) {
    const k = key(row);
    const bucket = groups.get(k);
    if (bucket) bucket.push(row);
    else groups.set(k, [row]);
  }
  return groups;
}

function sortedPoints(rows: Record<string, string>[], x: string, y: string): Point[] {
  const pts = rows.map((r): Point => [Number(r[x]), Number(r[y])]);
  pts.sort((a, b) => a[0] - b[0]);
  return pts;
}

function color(index: number): string {
  return PALETTE[index % PALETTE.length]!;
}

function profileChart(table: Table): Chart {
  for (const col of CONTRACTS.profile) {
    if (col !== "method") numericColumn(table, col);
  }
  const groups = rowsByKey(table, (r) => r["method"] ?? "");
  const series: Series[] = [];
  const bands: Band[] = [];
  let truth: Point[] | undefined;
  let i = 0;
  for (const [method, rows] of groups) {
    const c = color(i++);
    series.push({ label: method, color: c, points: sortedPoints(rows, "x1", "mean") });
    bands.push({
      color: c,
      upper: sortedPoints(rows, "x1", "upper"),
      lower: sortedPoints(rows, "x1", "lower"),
    });
    truth ??= sortedPoints(rows, "x1", "truth");
  }
  if (truth) {
    series.push({ label: "truth", color: "#000000", dash: "5 3", points: truth });
  }
  return {
    xLabel: "position along the transmitter line (m)",
    yLabel: "received power (dBm)",
    logY: false,
    series,
    bands,
  };
}

function outageVsSigmaXChart(table: Table, pout: number): Chart {
  numericColumn(table, "sigma_x");
  numericColumn(table, "outage_prob");
  const groups = rowsByKey(table, (r) => r["method"] ?? "");
  const series: Series[] = [];
  let i = 0;
  for (const [method, rows] of groups) {
    const points = sortedPoints(rows, "sigma_x", "outage_prob");
    const intervals = rows
      .map((r): [number, number, number] => [
        Number(r["sigma_x"]),
        Number(r["ci_low"]),
        Number(r["ci_high"]),
      ])
      .sort((a, b) => a[0] - b[0]);
    series.push({ label: method, color: color(i++), points, markers: true, intervals });
  }
  return {
    xLabel: "location noise sigma_x (m)",
    yLabel: "outage probability",
    logY: true,
    series,
    bands: [],
    refY: { value: pout, label: "p_out" },
  };
}

function outageVsMarginChart(table: Table, pout: number): Chart {
  numericColumn(table, "sigma_delta");
  numericColumn(table, "outage_prob");
  const sigmas = distinct(table, "sigma_x");
  const groups = rowsByKey(
    table,
    (r) => `${r["method"]}|${r["sigma_x"]}`,
  );
  const series: Series[] = [];
  let i = 0;
  for (const [key, rows] of groups) {
    const [method, sigma] = key.split("|");
    const label = sigmas.length > 1 ? `${method} (sigma_x=${sigma})` : `${method}`;
    series.push({
      label,
      color: color(i++),
      points: sortedPoints(rows, "sigma_delta", "outage_prob"),
    });
  }
  return {
    xLabel: "back-off margin sigma_delta (dB)",
    yLabel: "outage probability",
    logY: true,
    series,
    bands: [],
    refY: { value: pout, label: "p_out" },
  };
}

function rateCdfChart(table: Table): Chart {
  numericColumn(table, "rate");
  numericColumn(table, "cum_prob");
  const groups = rowsByKey(table, (r) => r["method"] ?? "");
  const series: Series[] = [];
  let i = 0;
  for (const [method, rows] of groups) {
    series.push({
      label: method,
      color: color(i++),
      points: sortedPoints(rows, "rate", "cum_prob"),
    });
  }
  return {
    xLabel: "received rate (bit/s/Hz)",
    yLabel: "cumulative probability",
    logY: true,
    series,
    bands: [],
  };
}

// ---------------------------------------------------------------- drawing

interface Scale {
  map(v: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, r0: number, r1: number): Scale {
  const span = hi - lo || 1;
  return {
    map: (v) => r0 + ((v - lo) / span) * (r1 - r0),
    ticks: niceTicks(lo, hi),
  };
}

function logScale(lo: number, hi: number, r0: number, r1: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const ticks: number[] = [];
  for (let k = Math.ceil(llo - 1e-9); k <= lhi + 1e-9; k++) ticks.push(10 ** k);
  return {
    map: (v) => r0 + ((Math.log10(v) - llo) / span) * (r1 - r0),
    ticks,
  };
}

function niceTicks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo || 1;
  const raw = span / count;
  const base = 10 ** Math.floor(Math.log10(raw));
  const err = raw / base;
  const step = base * (err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(0).replace("e+", "e");
  }
  return String(Math.round(v * 1e6) / 1e6);
}

/** Uniform decade labels for logarithmic axes, e.g. "1e-3", "1e0". */
function fmtLog(v: number): string {
  return v.toExponential(0).replace("e+", "e");
}

const px = (v: number): string => (Math.round(v * 100) / 100).toString();

function pathFrom(points: Point[], sx: Scale, sy: Scale): string {
  return points
    .map(([x, y], i) => `${i === 0 ? "M" : "L"}${px(sx.map(x))},${px(sy.map(y))}`)
    .join(" ");
}

function drawChart(chart: Chart, width: number, height: number): string {
  const margin = { top: 18, right: 16, bottom: 48, left: 68 };
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of chart.series) {
    for (const [x, y] of s.points) {
      xs.push(x);
      if (!chart.logY || y > 0) ys.push(y);
    }
    for (const [, lo, hi] of s.intervals ?? []) {
      if (!chart.logY || lo > 0) ys.push(lo);
      if (!chart.logY || hi > 0) ys.push(hi);
    }
  }
  for (const b of chart.bands) {
    for (const [x, y] of [...b.upper, ...b.lower]) {
      xs.push(x);
      ys.push(y);
    }
  }
  if (chart.refY) ys.push(chart.refY.value);
  if (xs.length === 0 || ys.length === 0) {
    throw new Error("nothing to draw: no plottable rows");
  }

  const xlo = Math.min(...xs);
  const xhi = Math.max(...xs);
  let sy: Scale;
  if (chart.logY) {
    const lo = 10 ** Math.floor(Math.log10(Math.min(...ys)) - 1e-12);
    const hi = 10 ** Math.ceil(Math.log10(Math.max(...ys)) + 1e-12);
    sy = logScale(lo, hi, y0, y1);
  } else {
    const lo = Math.min(...ys);
    const hi = Math.max(...ys);
    const pad = 0.05 * (hi - lo || 1);
    sy = linearScale(lo - pad, hi + pad, y0, y1);
  }
  const sx = linearScale(xlo, xhi, x0, x1);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);

  // Grid and axes.
  for (const t of sx.ticks) {
    const gx = px(sx.map(t));
    parts.push(`<line x1="${gx}" y1="${y0}" x2="${gx}" y2="${y1}" stroke="#e6e6e6"/>`);
    parts.push(
      `<text x="${gx}" y="${y0 + 18}" text-anchor="middle" fill="#333">${fmt(t)}</text>`,
    );
  }
  const fmtY = chart.logY ? fmtLog : fmt;
  for (const t of sy.ticks) {
    const gy = px(sy.map(t));
    parts.push(`<line x1="${x0}" y1="${gy}" x2="${x1}" y2="${gy}" stroke="#e6e6e6"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${gy}" text-anchor="end" dominant-baseline="middle" ` +
        `fill="#333">${fmtY(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" ` +
      `fill="none" stroke="#333"/>`,
  );
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 10}" text-anchor="middle" ` +
      `fill="#111">${chart.xLabel}</text>`,
  );
  parts.push(
    `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" fill="#111" ` +
      `transform="rotate(-90 16 ${(y0 + y1) / 2})">${chart.yLabel}</text>`,
  );

  // Shaded bands under the curves.
  for (const band of chart.bands) {
    const forward = band.upper;
    const backward = [...band.lower].reverse();
    const d = `${pathFrom(forward, sx, sy)} ${pathFrom(backward, sx, sy).replace(/^M/, "L")} Z`;
    parts.push(`<path d="${d}" fill="${band.color}" fill-opacity="0.18" stroke="none"/>`);
  }

  // Reference line for the outage target.
  if (chart.refY) {
    const gy = px(sy.map(chart.refY.value));
    parts.push(
      `<line class="pout-ref" x1="${x0}" y1="${gy}" x2="${x1}" y2="${gy}" ` +
        `stroke="#000" stroke-dasharray="7 4"/>`,
    );
    parts.push(
      `<text x="${x1 - 4}" y="${Number(gy) - 5}" text-anchor="end" ` +
        `fill="#000">${chart.refY.label} = ${fmtY(chart.refY.value)}</text>`,
    );
  }

  // Data series.
  for (const s of chart.series) {
    const drawable = chart.logY ? s.points.filter(([, y]) => y > 0) : s.points;
    if (drawable.length > 0) {
      const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
      parts.push(
        `<path d="${pathFrom(drawable, sx, sy)}" fill="none" ` +
          `stroke="${s.color}" stroke-width="1.7"${dash}/>`,
      );
    }
    for (const [x, lo, hi] of s.intervals ?? []) {
      if (chart.logY && (lo <= 0 || hi <= 0)) continue;
      const gx = px(sx.map(x));
      parts.push(
        `<line x1="${gx}" y1="${px(sy.map(lo))}" x2="${gx}" y2="${px(sy.map(hi))}" ` +
          `stroke="${s.color}" stroke-width="1"/>`,
      );
    }
    if (s.markers) {
      for (const [x, y] of drawable) {
        parts.push(
          `<circle cx="${px(sx.map(x))}" cy="${px(sy.map(y))}" r="3" fill="${s.color}"/>`,
        );
      }
    }
  }

  // Legend, top-right inside the plot area.
  chart.series.forEach((s, i) => {
    const ly = y1 + 14 + i * 16;
    const lx = x1 - 150;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" ` +
        `stroke="${s.color}" stroke-width="2"${dash}/>`,
    );
    parts.push(
      `<text x="${lx + 28}" y="${ly + 4}" fill="#111">${s.label}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
