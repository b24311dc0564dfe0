#!/usr/bin/env node
/** plot curves|scatter|model-est --in <files...> --out <image.svg> [options] */

import * as fs from "node:fs";
import * as path from "node:path";

import { renderCurves } from "./curves.js";
import { readCsv, readRunDir, readSummary } from "./io.js";
import { renderModelEstimates } from "./modelest.js";
import { renderScatter } from "./scatter.js";

interface Args {
  command: string;
  inputs: string[];
  out: string;
  window: number;
  estimator: string;
  summary?: string;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  if (!command || !["curves", "scatter", "model-est"].includes(command)) {
    throw new Error("usage: plot curves|scatter|model-est --in <files...> --out <image.svg>");
  }
  const args: Args = { command, inputs: [], out: "", window: 5, estimator: "head_std" };
  for (let i = 0; i < rest.length; i++) {
    const flag = rest[i];
    if (flag === "--in") {
      while (i + 1 < rest.length && !rest[i + 1].startsWith("--")) args.inputs.push(rest[++i]);
    } else if (flag === "--out") {
      args.out = rest[++i];
    } else if (flag === "--window") {
      args.window = Number(rest[++i]);
    } else if (flag === "--estimator") {
      args.estimator = rest[++i];
    } else if (flag === "--summary") {
      args.summary = rest[++i];
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  if (args.inputs.length === 0) throw new Error("--in requires at least one input");
  if (!args.out) throw new Error("--out is required");
  return args;
}

export function run(argv: string[], warn: (m: string) => void = (m) => console.error(m)): void {
  const args = parseArgs(argv);
  let svg: string;
  if (args.command === "curves") {
    const runs = args.inputs.map(readRunDir);
    svg = renderCurves(runs, args.window, warn);
  } else if (args.command === "scatter") {
    const table = readCsv(args.inputs[0]);
    let manifestValue: number | undefined;
    if (args.summary) {
      manifestValue = readSummary(args.summary).spearman[args.estimator];
    } else {
      // look for the harness's summary next to the csv
      const sibling = path.join(path.dirname(args.inputs[0]), "scatter_summary.json");
      if (fs.existsSync(sibling)) {
        manifestValue = readSummary(sibling).spearman[args.estimator];
      }
    }
    svg = renderScatter(table, args.estimator, manifestValue).svg;
  } else {
    svg = renderModelEstimates(readCsv(args.inputs[0]));
  }
  fs.writeFileSync(args.out, svg);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;

if (invokedDirectly) {
  try {
    run(process.argv.slice(2));
  } catch (e) {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    process.exit(1);
  }
}
