import { writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { IoError, SchemaError, readCcdfCsv, readRegionCsv, validateCcdfMonotone } from "./csv.js";
import { renderCcdf, renderRegion } from "./render.js";

function writeSvg(path: string, svg: string): void {
  try {
    writeFileSync(path, svg);
  } catch (e) {
    throw new IoError(`cannot write ${path}: ${(e as Error).message}`);
  }
}

export function main(argv: string[]): number {
  try {
    yargs(argv)
      .scriptName("pcq-plots")
      .command(
        "render-region",
        "distortion region figure from a region CSV",
        (y) =>
          y
            .option("in", { type: "string", demandOption: true, describe: "region CSV path" })
            .option("out", { type: "string", demandOption: true, describe: "output SVG path" }),
        (args) => {
          const rows = readRegionCsv(args.in);
          writeSvg(args.out, renderRegion(rows));
          console.log(`wrote ${args.out}`);
        }
      )
      .command(
        "render-ccdf",
        "distortion CCDF figure from a ccdf CSV",
        (y) =>
          y
            .option("in", { type: "string", demandOption: true, describe: "ccdf CSV path" })
            .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
            .option("linear", {
              type: "boolean",
              default: false,
              describe: "linear probability axis instead of log",
            }),
        (args) => {
          const curves = readCcdfCsv(args.in);
          validateCcdfMonotone(curves, args.in);
          writeSvg(args.out, renderCcdf(curves, !args.linear));
          console.log(`wrote ${args.out}`);
        }
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        if (err) throw err;
        throw new SchemaError(msg);
      })
      .exitProcess(false)
      .parseSync();
    return 0;
  } catch (e) {
    if (e instanceof IoError) {
      console.error(`i/o error: ${e.message}`);
      return 3;
    }
    if (e instanceof SchemaError) {
      console.error(`invalid input: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

process.exitCode = main(hideBin(process.argv));
