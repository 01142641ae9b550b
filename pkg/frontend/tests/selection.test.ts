import { describe, expect, it } from "vitest";

import { fitViewport, worldToScreen } from "../src/scatter.js";
import { pointInPolygon, rectPolygon, selectPoints,
         toExportPayload } from "../src/selection.js";
import { makeCloud } from "./fixtures.js";

describe("pointInPolygon", () => {
  const square = rectPolygon(0, 0, 10, 10);

  it("classifies inside and outside", () => {
    expect(pointInPolygon(square, 5, 5)).toBe(true);
    expect(pointInPolygon(square, 15, 5)).toBe(false);
    expect(pointInPolygon(square, -1, -1)).toBe(false);
  });

  it("handles concave lassos", () => {
    const concave: [number, number][] =
      [[0, 0], [10, 0], [10, 10], [5, 5], [0, 10]];
    expect(pointInPolygon(concave, 1, 8)).toBe(true);   // inside the left arm
    expect(pointInPolygon(concave, 5, 9)).toBe(false);  // inside the notch
  });
});

describe("selectPoints", () => {
  it("selecting k points yields exactly k export rows", () => {
    const points = makeCloud(40);
    const v = fitViewport(points, 500, 400);
    const targets = [3, 5, 8, 13, 21, 34, 1, 2, 0, 6];  // 10 points
    const screen = targets.map((i) =>
      worldToScreen(v, points[i].x, points[i].y));
    // a rectangle hugging exactly those points would grab others; lasso
    // each target with a tiny box and union instead
    const chosen = new Set<number>();
    for (const [sx, sy] of screen) {
      for (const index of selectPoints(
          points, v, rectPolygon(sx - 2, sy - 2, sx + 2, sy + 2))) {
        chosen.add(index);
      }
    }
    expect([...chosen].sort((a, b) => a - b))
      .toEqual([...new Set(targets)].sort((a, b) => a - b));
    const payload = toExportPayload(points, [...chosen]);
    expect(payload).toHaveLength(10);
    for (const row of payload) {
      expect(row.file).toMatch(/\.wav$/);
      expect(row.end).toBeGreaterThan(row.start);
    }
  });

  it("selects everything with a lasso around the full canvas", () => {
    const points = makeCloud(25);
    const v = fitViewport(points, 500, 400);
    const all = selectPoints(points, v, rectPolygon(-10, -10, 510, 410));
    expect(all).toHaveLength(25);
  });

  it("returns nothing for degenerate polygons", () => {
    const points = makeCloud(5);
    const v = fitViewport(points, 500, 400);
    expect(selectPoints(points, v, [[1, 1], [2, 2]])).toEqual([]);
  });

  it("respects the visibility mask", () => {
    const points = makeCloud(40);
    const v = fitViewport(points, 500, 400);
    const visible = points.map((_, i) => i % 2 === 0);
    const chosen = selectPoints(points, v, rectPolygon(-10, -10, 510, 410),
                                visible);
    expect(chosen.every((i) => i % 2 === 0)).toBe(true);
    expect(chosen).toHaveLength(20);
  });
});
