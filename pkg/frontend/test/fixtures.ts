/** Test fixtures: real result CSVs produced through the aircomp CLI (the
 * plotting tool's only upstream interface), desk-scaled so the suite stays
 * fast, plus a deliberately malformed file. */

import { execFileSync } from "child_process";
import { existsSync, mkdirSync, readFileSync, writeFileSync } from "fs";
import { dirname, join } from "path";
import { fileURLToPath } from "url";

const HERE = dirname(fileURLToPath(import.meta.url));
export const FIXTURE_DIR = join(HERE, "..", "test-fixtures");

function runAircomp(args: string[]): void {
  execFileSync("aircomp", args, { stdio: "pipe" });
}

/** Shrink a preset spec so it runs in seconds: fewer subcarriers, sweep
 * points and realizations. The qualitative content (schemes, scenario,
 * axes, the certain-outage of the estimation-blind scheme) is unchanged. */
function reduceSpec(path: string, sweepValues: number[]): void {
  const spec = JSON.parse(readFileSync(path, "utf8"));
  spec.base.num_subcarriers = 16;
  spec.sweep_values = sweepValues;
  spec.realizations = 2;
  writeFileSync(path, JSON.stringify(spec, null, 2));
}

export interface Fixtures {
  fig2a: string;
  fig2b: string;
  malformed: string;
  empty: string;
}

export function buildFixtures(): Fixtures {
  mkdirSync(FIXTURE_DIR, { recursive: true });
  const fig2aCsv = join(FIXTURE_DIR, "fig2a.csv");
  const fig2bCsv = join(FIXTURE_DIR, "fig2b.csv");

  if (!existsSync(fig2aCsv)) {
    const spec = join(FIXTURE_DIR, "fig2a.json");
    runAircomp(["preset", "--name", "fig2a", "--out", spec]);
    reduceSpec(spec, [0, 15, 30]);
    runAircomp(["run", "--spec", spec, "--out", fig2aCsv]);
  }
  if (!existsSync(fig2bCsv)) {
    const spec = join(FIXTURE_DIR, "fig2b.json");
    runAircomp(["preset", "--name", "fig2b", "--out", spec]);
    reduceSpec(spec, [0, 10, 20, 30]);
    runAircomp(["run", "--spec", spec, "--out", fig2bCsv]);
  }

  const malformed = join(FIXTURE_DIR, "malformed.csv");
  writeFileSync(
    malformed,
    "sweep_name,sweep_value,scheme,metric\npower_db,0.0,proposed,0.5\n"
  );
  const empty = join(FIXTURE_DIR, "header-only.csv");
  writeFileSync(
    empty,
    "sweep_name,sweep_value,scheme,scenario,metric,stderr,realizations,seed,floor\n"
  );
  return { fig2a: fig2aCsv, fig2b: fig2bCsv, malformed, empty };
}
