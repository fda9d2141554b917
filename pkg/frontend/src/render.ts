/** File-level rendering: one image per (scenario, sweep axis) group found in
 * each input CSV. */

import { mkdirSync, writeFileSync } from "fs";
import { basename, join } from "path";
import { DEFAULT_STYLE, ChartStyle, renderChart } from "./chart.js";
import { groupRows, loadRows } from "./data.js";

export interface RenderOptions {
  format: "svg" | "png";
  style?: ChartStyle;
}

export async function renderFigures(
  inputs: string[],
  outDir: string,
  options: RenderOptions = { format: "svg" }
): Promise<string[]> {
  const style = options.style ?? DEFAULT_STYLE;
  const written: string[] = [];
  // validate every input before writing anything, so a schema mismatch in
  // any file produces no images at all
  const plans: { path: string; name: string; svg: string }[] = [];
  for (const input of inputs) {
    const rows = loadRows(input);
    const groups = groupRows(rows);
    if (groups.length === 0) {
      throw new Error(`no plottable rows in ${input}`);
    }
    const stem = basename(input).replace(/\.[^.]*$/, "");
    for (const group of groups) {
      const name = `${stem}_${group.scenario}_${group.sweepName}.${options.format}`;
      plans.push({ path: input, name, svg: renderChart(group, style) });
    }
  }
  mkdirSync(outDir, { recursive: true });
  for (const plan of plans) {
    const target = join(outDir, plan.name);
    if (options.format === "svg") {
      writeFileSync(target, plan.svg);
    } else {
      const { Resvg } = await import("@resvg/resvg-js");
      const png = new Resvg(plan.svg, { fitTo: { mode: "width", value: style.width * 2 } }).render();
      writeFileSync(target, png.asPng());
    }
    written.push(target);
  }
  return written;
}
