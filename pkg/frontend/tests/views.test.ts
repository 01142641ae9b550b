import { describe, expect, it } from "vitest";

import { cellColor, heatmapModel } from "../src/heatmap.js";
import { clusteringRows, overviewRows, probeBars } from "../src/metrics.js";
import { peakFrequency, toPixels } from "../src/spectrogram.js";
import { spectrogramResponse } from "./fixtures.js";

describe("spectrogram view", () => {
  it("peak frequency matches the hot band", () => {
    const response = spectrogramResponse(16);  // 16 * 62.5 Hz = 1000 Hz
    expect(peakFrequency(response)).toBeCloseTo(1000, 6);
  });

  it("maps dB to grayscale with low frequencies at the bottom", () => {
    const { pixels, width, height } = toPixels([[-80, 0], [0, -80]], -80);
    expect(width).toBe(2);
    expect(height).toBe(2);
    // matrix row 1 (low freq, values [0,-80]) lands on pixel row 0
    expect(pixels[0]).toBe(255);
    expect(pixels[4]).toBe(0);
    // matrix row 0 (high freq, values [-80,0]) lands on pixel row 1
    expect(pixels[8]).toBe(0);
    expect(pixels[12]).toBe(255);
    expect(pixels[3]).toBe(255);  // opaque alpha
  });
});

describe("metrics view models", () => {
  const report = { probe_type: "linear", map: 0.8,
                   per_class_ap: { frog: 0.9, toad: 0.7 },
                   split_sizes: { train: 10, val: 2, test: 3 } };

  it("bars sorted by AP with mAP appended", () => {
    const bars = probeBars(report);
    expect(bars.map((b) => b.label)).toEqual(["frog", "toad", "mAP"]);
    expect(bars[2].value).toBe(0.8);
  });

  it("clustering rows include cross comparisons", () => {
    const rows = clusteringRows({
      results: [{ scope: "full", label_set: "time_of_day", k: 4, ami: 0.5,
                  ari: 0.4, n_scored: 100 }],
      cross: [{ label_set_a: "ground_truth", label_set_b: "parent_directory",
                ami: 0.2, ari: 0.1 }],
    });
    expect(rows).toHaveLength(2);
    expect(rows[1].scope).toBe("cross");
    expect(rows[1].labelSet).toBe("ground_truth vs parent_directory");
  });

  it("overview aggregates per model", () => {
    const rows = overviewRows([
      { model: "a", probes: { knn: { ...report, probe_type: "knn" },
                              linear: report },
        clustering: { results: [
          { scope: "annotated_only", label_set: "ground_truth", k: 3,
            ami: 0.95, ari: 0.9, n_scored: 50 },
          { scope: "full", label_set: "time_of_day", k: 9, ami: 0.4,
            ari: 0.3, n_scored: 100 }], cross: [] } },
      { model: "b", probes: null, clustering: null },
    ]);
    expect(rows[0]).toEqual({ model: "a", linearMap: 0.8, knnMap: 0.8,
                              bestAmi: 0.95 });
    expect(rows[1]).toEqual({ model: "b", linearMap: null, knnMap: null,
                              bestAmi: null });
  });
});

describe("heatmap view model", () => {
  const response = {
    class: "frog", model: "m", available_classes: ["frog"],
    dates: ["2024-06-01", "2024-06-02"], hours: [...Array(24).keys()],
    cells: [new Array(24).fill(0), new Array(24).fill(0)],
  };

  it("computes totals and maxima", () => {
    response.cells[0][6] = 3;
    response.cells[1][22] = 1;
    const model = heatmapModel(response);
    expect(model.maxCount).toBe(3);
    expect(model.total).toBe(4);
  });

  it("zero cells stay dark, hot cells shift hue", () => {
    expect(cellColor(0, 5)).toBe("#16181d");
    expect(cellColor(5, 5)).not.toBe(cellColor(1, 5));
  });
});
