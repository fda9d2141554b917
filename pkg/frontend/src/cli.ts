#!/usr/bin/env node
/** plot_figures --in <csv...> --out <dir> [--format png|svg] */

import { SchemaError } from "./schema.js";
import { renderFigures } from "./render.js";

interface Args {
  inputs: string[];
  out: string;
  format: "svg" | "png";
}

function parseArgs(argv: string[]): Args {
  const inputs: string[] = [];
  let out = "";
  let format: "svg" | "png" = "png";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--in") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        inputs.push(argv[++i]);
      }
    } else if (arg === "--out") {
      out = argv[++i] ?? "";
    } else if (arg === "--format") {
      const value = argv[++i];
      if (value !== "svg" && value !== "png") {
        throw new Error(`--format must be png or svg, got ${JSON.stringify(value)}`);
      }
      format = value;
    } else if (arg === "--help" || arg === "-h") {
      console.log("usage: plot_figures --in <csv...> --out <dir> [--format png|svg]");
      process.exit(0);
    } else {
      throw new Error(`unknown argument ${JSON.stringify(arg)}`);
    }
  }
  if (inputs.length === 0) throw new Error("--in requires at least one CSV path");
  if (!out) throw new Error("--out is required");
  return { inputs, out, format };
}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const written = await renderFigures(args.inputs, args.out, { format: args.format });
    for (const path of written) console.log(`wrote ${path}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: ${err.message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
