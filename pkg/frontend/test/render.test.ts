import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync, readdirSync } from "fs";
import { tmpdir } from "os";
import { dirname, join } from "path";
import { fileURLToPath } from "url";
import { beforeAll, describe, expect, it } from "vitest";

import { groupRows, loadRows } from "../src/data.js";
import { renderChart } from "../src/chart.js";
import { renderFigures } from "../src/render.js";
import { SchemaError, checkColumns } from "../src/schema.js";
import { Fixtures, buildFixtures } from "./fixtures.js";

const HERE = dirname(fileURLToPath(import.meta.url));

let fx: Fixtures;

beforeAll(() => {
  fx = buildFixtures();
}, 300_000);

function freshDir(): string {
  return mkdtempSync(join(tmpdir(), "plots-"));
}

function polylineY(svg: string, scheme: string): number[] {
  const match = svg.match(new RegExp(`<polyline data-scheme="${scheme}" points="([^"]+)"`));
  expect(match, `polyline for ${scheme}`).toBeTruthy();
  return match![1].split(" ").map((pair) => Number(pair.split(",")[1]));
}

describe("schema", () => {
  it("accepts the documented column set", () => {
    checkColumns([
      "sweep_name", "sweep_value", "scheme", "scenario", "metric",
      "stderr", "realizations", "seed", "floor",
    ]);
  });

  it("reports the column diff on mismatch", () => {
    try {
      checkColumns(["sweep_name", "sweep_value", "scheme", "metric", "surprise"]);
      expect.unreachable("should have thrown");
    } catch (err) {
      const schemaErr = err as SchemaError;
      expect(schemaErr.missing).toContain("scenario");
      expect(schemaErr.missing).toContain("stderr");
      expect(schemaErr.extra).toEqual(["surprise"]);
    }
  });
});

describe("data loading", () => {
  it("parses and groups harness output", () => {
    const groups = groupRows(loadRows(fx.fig2b));
    expect(groups).toHaveLength(1);
    const group = groups[0];
    expect(group.scenario).toBe("error_constrained");
    expect(group.sweepName).toBe("power_db");
    expect(group.series.map((s) => s.scheme).sort()).toEqual([
      "channel_inversion", "equal_power", "ignore_csi", "proposed",
    ]);
  });

  it("keeps the floor as its own dashed series", () => {
    const group = groupRows(loadRows(fx.fig2a))[0];
    expect(group.floor).not.toBeNull();
    expect(group.floor!.y.every((v) => v > 0)).toBe(true);
  });

  it("rejects header-only files", async () => {
    await expect(renderFigures([fx.empty], freshDir())).rejects.toThrow(/no plottable rows/);
  });
});

describe("chart rendering", () => {
  it("draws one line per scheme plus the dashed floor", () => {
    const group = groupRows(loadRows(fx.fig2a))[0];
    const svg = renderChart(group);
    for (const scheme of ["proposed", "ignore_csi", "equal_power", "channel_inversion"]) {
      expect(svg).toContain(`data-scheme="${scheme}"`);
    }
    expect(svg).toContain('data-scheme="floor"');
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain("average computation MSE");
    expect(svg).toContain(`${group.realizations} realizations`);
  });

  it("keeps the estimation-blind outage line flat at certain outage", () => {
    const group = groupRows(loadRows(fx.fig2b))[0];
    const blind = group.series.find((s) => s.scheme === "ignore_csi")!;
    expect(blind.y.every((v) => v === 1.0)).toBe(true);
    const svg = renderChart(group);
    const ys = polylineY(svg, "ignore_csi");
    expect(ys.length).toBe(4);
    expect(new Set(ys).size).toBe(1); // flat line in pixel space too
  });
});

describe("renderFigures", () => {
  it("produces one image per preset CSV", async () => {
    const out = freshDir();
    const written = await renderFigures([fx.fig2a, fx.fig2b], out, { format: "svg" });
    expect(written).toHaveLength(2);
    for (const path of written) {
      expect(existsSync(path)).toBe(true);
      expect(readFileSync(path, "utf8")).toContain("<svg");
    }
  });

  it("renders PNG when asked", async () => {
    const out = freshDir();
    const written = await renderFigures([fx.fig2b], out, { format: "png" });
    const magic = readFileSync(written[0]).subarray(0, 8);
    expect([...magic]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  });

  it("writes nothing on schema mismatch", async () => {
    const out = freshDir();
    await expect(renderFigures([fx.fig2b, fx.malformed], out, { format: "svg" })).rejects.toThrow(
      SchemaError
    );
    expect(readdirSync(out)).toHaveLength(0);
  });
});

describe("plot_figures CLI", () => {
  const cliPath = join(HERE, "..", "dist", "cli.js");

  it("exits zero and writes images on good input", () => {
    const out = freshDir();
    const stdout = execFileSync(
      process.execPath,
      [cliPath, "--in", fx.fig2a, fx.fig2b, "--out", out, "--format", "svg"],
      { encoding: "utf8" }
    );
    expect(stdout).toContain("wrote");
    expect(readdirSync(out)).toHaveLength(2);
  });

  it("exits nonzero and writes no image on schema mismatch", () => {
    const out = freshDir();
    let code = 0;
    try {
      execFileSync(process.execPath, [cliPath, "--in", fx.malformed, "--out", out], {
        encoding: "utf8",
        stdio: "pipe",
      });
    } catch (err) {
      code = (err as { status: number }).status;
    }
    expect(code).not.toBe(0);
    expect(readdirSync(out).length).toBe(0);
  });

  it("rejects unknown formats", () => {
    let code = 0;
    try {
      execFileSync(process.execPath, [cliPath, "--in", fx.fig2a, "--out", freshDir(), "--format", "bmp"], {
        encoding: "utf8",
        stdio: "pipe",
      });
    } catch (err) {
      code = (err as { status: number }).status;
    }
    expect(code).toBe(2);
  });
});
