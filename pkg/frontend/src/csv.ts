import { readFileSync } from "fs";
import Papa from "papaparse";

export class SchemaError extends Error {}
export class IoError extends Error {}

export interface RegionRow {
  mode: string;
  D1: number;
  D2: number;
}

export interface CcdfPoint {
  D: number;
  prob: number;
}

/** CCDF rows grouped by source index, preserving row order. */
export type CcdfCurves = Map<string, CcdfPoint[]>;

function readCsv(path: string, expected: string[]): Record<string, string>[] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (e) {
    throw new IoError(`cannot read ${path}: ${(e as Error).message}`);
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const cols = parsed.meta.fields ?? [];
  if (cols.length !== expected.length || !expected.every((c, i) => cols[i] === c)) {
    throw new SchemaError(
      `${path}: expected columns [${expected.join(", ")}], got [${cols.join(", ")}]`
    );
  }
  return parsed.data;
}

function toNumber(raw: string, column: string, path: string): number {
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`${path}: column ${column} holds non-numeric value "${raw}"`);
  }
  return v;
}

export function readRegionCsv(path: string): RegionRow[] {
  const rows = readCsv(path, ["mode", "D1", "D2"]).map((r) => ({
    mode: r.mode,
    D1: toNumber(r.D1, "D1", path),
    D2: toNumber(r.D2, "D2", path),
  }));
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return rows;
}

export function readCcdfCsv(path: string): CcdfCurves {
  const rows = readCsv(path, ["source", "D", "prob"]);
  const curves: CcdfCurves = new Map();
  for (const r of rows) {
    const pt = {
      D: toNumber(r.D, "D", path),
      prob: toNumber(r.prob, "prob", path),
    };
    if (pt.prob < 0 || pt.prob > 1) {
      throw new SchemaError(`${path}: column prob outside [0, 1] (${pt.prob})`);
    }
    const list = curves.get(r.source) ?? [];
    list.push(pt);
    curves.set(r.source, list);
  }
  if (curves.size === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return curves;
}

/** A CCDF must be nonincreasing in D within every source's curve. */
export function validateCcdfMonotone(curves: CcdfCurves, path: string): void {
  for (const [source, pts] of curves) {
    for (let i = 1; i < pts.length; i++) {
      if (pts[i].D < pts[i - 1].D) {
        throw new SchemaError(
          `${path}: column D not ascending for source ${source} at row ${i}`
        );
      }
      if (pts[i].prob > pts[i - 1].prob + 1e-12) {
        throw new SchemaError(
          `${path}: column prob not nonincreasing for source ${source} ` +
            `(D=${pts[i].D}: ${pts[i - 1].prob} -> ${pts[i].prob})`
        );
      }
    }
  }
}
