#!/usr/bin/env node
/** CLI: render convergence / effectivity figures from study CSVs.
 *
 *   oseenvb-plots convergence --csv run/convergence.csv [--csv run2/adapt.csv]
 *       --columns err_omega,err_V --slopes 1,2 --out fig.svg [--png fig.png]
 *   oseenvb-plots effectivity --csv run/convergence.csv --out eff.svg
 *
 * Exits 2 on bad flags or schema mismatch (missing column named in the
 * message), 1 on unexpected I/O errors.
 */

import { SchemaError } from "./csv";
import { plotConvergence, plotEffectivity, PlotSpec } from "./plot";

interface Args {
  command: string;
  csv: string[];
  columns: string[];
  slopes: number[];
  out?: string;
  png?: string;
  x?: "mesh" | "dofs";
  title?: string;
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) {
    throw new UsageError("missing command: convergence | effectivity");
  }
  const args: Args = {
    command: argv[0], csv: [], columns: [], slopes: [],
  };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    const need = () => {
      if (i + 1 >= argv.length) throw new UsageError(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--csv": args.csv.push(need()); break;
      case "--columns": args.columns = need().split(",").filter(Boolean); break;
      case "--slopes":
        args.slopes = need().split(",").filter(Boolean).map((s) => {
          const v = Number(s);
          if (!Number.isFinite(v)) throw new UsageError(`bad slope "${s}"`);
          return v;
        });
        break;
      case "--out": args.out = need(); break;
      case "--png": args.png = need(); break;
      case "--x": {
        const v = need();
        if (v !== "mesh" && v !== "dofs") {
          throw new UsageError(`--x must be "mesh" or "dofs", got "${v}"`);
        }
        args.x = v;
        break;
      }
      case "--title": args.title = need(); break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (args.csv.length === 0) throw new UsageError("at least one --csv required");
  if (!args.out) throw new UsageError("--out required");
  return args;
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
  const spec: PlotSpec = {
    csvPaths: args.csv,
    columns: args.columns,
    slopes: args.slopes,
    outPath: args.out!,
    pngPath: args.png,
    xAxis: args.x,
    title: args.title,
  };
  try {
    let written: string[];
    if (args.command === "convergence") {
      if (spec.columns.length === 0) {
        spec.columns = ["err_omega", "err_p", "err_V"];
      }
      written = plotConvergence(spec);
    } else if (args.command === "effectivity") {
      written = plotEffectivity(spec);
    } else {
      process.stderr.write(`error: unknown command "${args.command}"\n`);
      return 2;
    }
    for (const p of written) {
      process.stdout.write(`wrote ${p}\n`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`error: schema mismatch: ${err.message}\n`);
      return 2;
    }
    if (err instanceof Error && (err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
