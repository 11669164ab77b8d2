/** Readers for the solver's study CSV files.
 *
 * Two fixed schemas are accepted: uniform studies keyed by (level, h) and
 * adaptive studies keyed by (step, heff); the remaining columns coincide.
 */

export const CONV_HEADER = [
  "level", "h", "dofs",
  "err_omega", "rate_omega", "err_p", "rate_p",
  "err_u_direct", "rate_u_direct", "err_u_elliptic", "rate_u_elliptic",
  "err_V", "rate_V", "err_Vw", "rate_Vw",
  "eta", "eff1", "eff2",
];

export const ADAPT_HEADER = ["step", "heff", ...CONV_HEADER.slice(2)];

export class SchemaError extends Error {}

export interface Study {
  kind: "uniform" | "adaptive";
  columns: string[];
  /** column name -> numeric values (NaN for empty rate cells) */
  data: Map<string, number[]>;
  rows: number;
}

export function parseStudy(text: string): Study {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const header = lines[0].split(",");
  let kind: Study["kind"];
  if (arraysEqual(header, CONV_HEADER)) {
    kind = "uniform";
  } else if (arraysEqual(header, ADAPT_HEADER)) {
    kind = "adaptive";
  } else {
    const want = CONV_HEADER.join(",");
    throw new SchemaError(
      `unrecognized CSV header: got "${lines[0]}", expected the uniform ` +
      `schema "${want}" or its adaptive variant (step,heff,...)`,
    );
  }
  if (lines.length < 2) {
    throw new SchemaError("CSV has a header but no data rows");
  }
  const data = new Map<string, number[]>(header.map((name) => [name, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(
        `row ${i} has ${cells.length} cells, expected ${header.length}`,
      );
    }
    cells.forEach((cell, j) => {
      if (cell === "") {
        data.get(header[j])!.push(NaN);
        return;
      }
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        throw new SchemaError(`row ${i}, column ${header[j]}: bad number "${cell}"`);
      }
      data.get(header[j])!.push(value);
    });
  }
  return { kind, columns: header, data, rows: lines.length - 1 };
}

export function column(study: Study, name: string): number[] {
  const values = study.data.get(name);
  if (!values) {
    throw new SchemaError(`column "${name}" not present in this CSV`);
  }
  return values;
}

/** The natural x-axis of a study: h for uniform, heff for adaptive. */
export function meshSizeColumn(study: Study): string {
  return study.kind === "uniform" ? "h" : "heff";
}

function arraysEqual(a: string[], b: string[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}
