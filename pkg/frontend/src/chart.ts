/** Tiny dependency-free SVG line chart tailored to the results schema:
 * metric versus sweep value, one line per scheme, optional dashed floor,
 * log-scale MSE axis, linear [0, 1] outage axis. */

import { FigureGroup, Series } from "./data.js";

export interface ChartStyle {
  width: number;
  height: number;
  showStderr: boolean;
}

export const DEFAULT_STYLE: ChartStyle = { width: 760, height: 480, showStderr: true };

const COLORS: Record<string, string> = {
  proposed: "#c0392b",
  ignore_csi: "#7f8c8d",
  equal_power: "#2980b9",
  channel_inversion: "#27ae60",
};
const FALLBACK_COLORS = ["#8e44ad", "#d35400", "#16a085", "#2c3e50"];

const AXIS_LABELS: Record<string, string> = {
  power_db: "transmit power (dB)",
  error_variance: "channel estimation error variance",
  num_devices: "number of devices",
  num_antennas: "number of receive antennas",
};

function metricLabel(scenario: string): string {
  return scenario === "error_constrained" ? "computation outage probability" : "average computation MSE";
}

interface Scale {
  (value: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number, tickCount = 6): Scale {
  const span = hi - lo || 1;
  const fn = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  const step = span / (tickCount - 1);
  fn.ticks = Array.from({ length: tickCount }, (_, i) => lo + i * step);
  return fn;
}

function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const fn = ((v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let d = Math.floor(llo); d <= Math.ceil(lhi); d++) ticks.push(10 ** d);
  fn.ticks = ticks.filter((t) => t >= lo / 1.0001 && t <= hi * 1.0001);
  return fn;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10_000) return String(Number(v.toPrecision(4)));
  return v.toExponential(0);
}

function colorFor(scheme: string, index: number): string {
  return COLORS[scheme] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

export function renderChart(group: FigureGroup, style: ChartStyle = DEFAULT_STYLE): string {
  const { width, height } = style;
  const margin = { left: 78, right: 24, top: 24, bottom: 86 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const outage = group.scenario === "error_constrained";

  const allSeries = group.floor ? [...group.series, group.floor] : group.series;
  const xs = allSeries.flatMap((s) => s.x);
  const ys = allSeries.flatMap((s) => s.y);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);

  let yScaleRaw: Scale;
  let clampLo = 0;
  if (outage) {
    yScaleRaw = linearScale(0, 1, 0, 1, 6);
  } else {
    const positive = ys.filter((v) => v > 0);
    const lo = positive.length ? Math.min(...positive) : 1e-6;
    const hi = positive.length ? Math.max(...positive) : 1;
    clampLo = lo / 2; // zeros (perfect computation) pin to the bottom edge
    yScaleRaw = logScale(clampLo, hi * 1.3, 0, 1);
  }
  const sx = (v: number) => margin.left + (xHi === xLo ? 0.5 : (v - xLo) / (xHi - xLo)) * plotW;
  const sy = (v: number) => margin.top + (1 - yScaleRaw(Math.max(v, clampLo || v))) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif" font-size="13">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    `<rect x="${margin.left}" y="${margin.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`
  );

  // y grid + labels
  for (const tick of yScaleRaw.ticks) {
    const y = margin.top + (1 - yScaleRaw(tick)) * plotH;
    if (y < margin.top - 1 || y > margin.top + plotH + 1) continue;
    parts.push(
      `<line x1="${margin.left}" y1="${y.toFixed(1)}" x2="${margin.left + plotW}" y2="${y.toFixed(1)}" stroke="#ddd"/>`,
      `<text x="${margin.left - 8}" y="${(y + 4).toFixed(1)}" text-anchor="end">${fmt(tick)}</text>`
    );
  }
  // x ticks at the observed sweep values
  const xticks = [...new Set(xs)].sort((a, b) => a - b);
  for (const tick of xticks) {
    const x = sx(tick);
    parts.push(
      `<line x1="${x.toFixed(1)}" y1="${margin.top + plotH}" x2="${x.toFixed(1)}" y2="${margin.top + plotH + 5}" stroke="#333"/>`,
      `<text x="${x.toFixed(1)}" y="${margin.top + plotH + 20}" text-anchor="middle">${fmt(tick)}</text>`
    );
  }

  // axis titles
  const xLabel = AXIS_LABELS[group.sweepName] ?? group.sweepName;
  parts.push(
    `<text x="${margin.left + plotW / 2}" y="${height - 46}" text-anchor="middle">${xLabel}</text>`,
    `<text transform="rotate(-90 16 ${margin.top + plotH / 2})" x="16" y="${margin.top + plotH / 2}" text-anchor="middle">${metricLabel(group.scenario)}</text>`
  );

  const drawSeries = (series: Series, color: string, dashed: boolean) => {
    const pts = series.x.map((x, i) => `${sx(x).toFixed(2)},${sy(series.y[i]).toFixed(2)}`).join(" ");
    const dash = dashed ? ` stroke-dasharray="7,5"` : "";
    parts.push(
      `<polyline data-scheme="${series.scheme}" points="${pts}" fill="none" stroke="${color}" stroke-width="2"${dash}/>`
    );
    if (!dashed) {
      series.x.forEach((x, i) => {
        parts.push(`<circle cx="${sx(x).toFixed(2)}" cy="${sy(series.y[i]).toFixed(2)}" r="3.2" fill="${color}"/>`);
        if (style.showStderr && series.stderr[i] > 0) {
          const y1 = sy(series.y[i] + series.stderr[i]);
          const y2 = sy(Math.max(series.y[i] - series.stderr[i], clampLo || 0));
          parts.push(
            `<line x1="${sx(x).toFixed(2)}" y1="${y1.toFixed(2)}" x2="${sx(x).toFixed(2)}" y2="${y2.toFixed(2)}" stroke="${color}" stroke-width="1"/>`
          );
        }
      });
    }
  };

  group.series.forEach((s, i) => drawSeries(s, colorFor(s.scheme, i), false));
  if (group.floor) drawSeries(group.floor, "#555", true);

  // legend
  const legendEntries = [...group.series.map((s) => s.scheme), ...(group.floor ? ["floor"] : [])];
  legendEntries.forEach((scheme, i) => {
    const y = margin.top + 14 + i * 18;
    const x = margin.left + 12;
    const color = scheme === "floor" ? "#555" : colorFor(scheme, group.series.findIndex((s) => s.scheme === scheme));
    const dash = scheme === "floor" ? ` stroke-dasharray="7,5"` : "";
    parts.push(
      `<line x1="${x}" y1="${y}" x2="${x + 26}" y2="${y}" stroke="${color}" stroke-width="2"${dash}/>`,
      `<text x="${x + 32}" y="${y + 4}">${scheme}</text>`
    );
  });

  // provenance caption
  parts.push(
    `<text x="${margin.left + plotW / 2}" y="${height - 14}" text-anchor="middle" fill="#666" font-size="12">scenario: ${group.scenario} | seed ${group.seed} | ${group.realizations} realizations per point</text>`,
    `</svg>`
  );
  return parts.join("\n");
}
