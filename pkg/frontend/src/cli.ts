/** Command-line figure renderer.
 *
 * Usage: node dist/cli.js --input sweep_sigma_x.csv --kind outage-vs-sigmax \
 *                         --output sweep.svg [--pout 1e-3]
 */

import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";

import { FIGURE_KINDS, FigureKind, renderFigure } from "./figures.js";

export function main(argv: string[]): number {
  const args = yargs(argv)
    .option("input", {
      type: "string",
      demandOption: true,
      describe: "input CSV path (one of the documented contracts)",
    })
    .option("kind", {
      type: "string",
      demandOption: true,
      choices: FIGURE_KINDS as unknown as string[],
      describe: "figure kind matching the CSV header",
    })
    .option("output", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .option("pout", {
      type: "number",
      default: 1e-3,
      describe: "outage target for the reference line on outage figures",
    })
    .strict()
    .exitProcess(false)
    .parseSync();

  const csvText = readFileSync(args.input, "utf8");
  const svg = renderFigure(args.kind as FigureKind, csvText, { pout: args.pout });
  writeFileSync(args.output, svg, "utf8");
  console.log(`wrote ${args.output} (${args.kind}, ${svg.length} bytes)`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  try {
    process.exitCode = main(process.argv.slice(2));
  } catch (err) {
    console.error(`figure rendering failed: ${(err as Error).message}`);
    process.exitCode = 1;
  }
}
