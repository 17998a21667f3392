import { describe, expect, it } from "vitest";

import { distinct, numericColumn, parseCsv, requireColumns } from "../src/csv.js";

const SAMPLE = "method,rate,cum_prob\npure_gp,0.0,0.05\npure_gp,1.5,0.25\nnigp2,0.0,0.04\n";

describe("parseCsv", () => {
  it("returns columns and keyed rows", () => {
    const table = parseCsv(SAMPLE);
    expect(table.columns).toEqual(["method", "rate", "cum_prob"]);
    expect(table.rows).toHaveLength(3);
    expect(table.rows[0]).toEqual({ method: "pure_gp", rate: "0.0", cum_prob: "0.05" });
  });

  it("tolerates a trailing newline", () => {
    expect(parseCsv(SAMPLE + "\n").rows).toHaveLength(3);
  });
});

describe("requireColumns", () => {
  it("accepts the exact documented header", () => {
    expect(() =>
      requireColumns(parseCsv(SAMPLE), ["method", "rate", "cum_prob"], "test"),
    ).not.toThrow();
  });

  it("names the expected columns on mismatch", () => {
    expect(() =>
      requireColumns(parseCsv(SAMPLE), ["method", "x1", "mean"], "figure kind profile"),
    ).toThrow(/figure kind profile: expected columns method,x1,mean/);
  });

  it("rejects reordered columns", () => {
    const table = parseCsv("rate,method,cum_prob\n1.0,a,0.5\n");
    expect(() => requireColumns(table, ["method", "rate", "cum_prob"], "t")).toThrow(
      /expected columns/,
    );
  });
});

describe("numericColumn", () => {
  it("parses a numeric column", () => {
    expect(numericColumn(parseCsv(SAMPLE), "rate")).toEqual([0.0, 1.5, 0.0]);
  });

  it("rejects non-numeric cells with position info", () => {
    const table = parseCsv("method,rate,cum_prob\npure_gp,abc,0.5\n");
    expect(() => numericColumn(table, "rate")).toThrow(/column rate, row 1/);
  });
});

describe("distinct", () => {
  it("keeps first-appearance order", () => {
    expect(distinct(parseCsv(SAMPLE), "method")).toEqual(["pure_gp", "nigp2"]);
  });
});
