/** Shared fixtures mirroring the documented service payloads. */

import type { EmbeddingPoint, EmbeddingsResponse, SpectrogramResponse } from "../src/api.js";

export function makePoint(overrides: Partial<EmbeddingPoint> = {}): EmbeddingPoint {
  return {
    file: "siteA/20240601_060000.wav",
    start: 0, end: 1, x: 0, y: 0,
    labels: { time_of_day: 6, day_of_year: 153, parent_directory: "siteA",
              audio_file_name: "20240601_060000", cluster_id: 0,
              ground_truth: [] },
    ...overrides,
  };
}

/** A grid of points spread over two sites/classes for panel tests. */
export function makeCloud(n = 40): EmbeddingPoint[] {
  const points: EmbeddingPoint[] = [];
  for (let i = 0; i < n; i++) {
    const site = i % 2 === 0 ? "siteA" : "siteB";
    points.push(makePoint({
      file: `${site}/20240601_06000${i % 10}.wav`,
      start: i, end: i + 1,
      x: (i % 8) + (i % 2 === 0 ? 0 : 30),
      y: Math.floor(i / 8),
      labels: {
        time_of_day: i % 24, day_of_year: 150 + (i % 2),
        parent_directory: site, cluster_id: i % 3,
        ground_truth: i % 4 === 0 ? ["tone500hz"] : [],
      },
    }));
  }
  return points;
}

export function embeddingsResponse(model: string, points: EmbeddingPoint[])
    : EmbeddingsResponse {
  return { model, reducer: "tsne", n_points: points.length, points };
}

/** Synthetic spectrogram with one hot band at bandIndex. */
export function spectrogramResponse(bandIndex: number): SpectrogramResponse {
  const bins = 129;
  const frames = 20;
  const matrix: number[][] = [];
  const freqAxis: number[] = [];
  for (let row = 0; row < bins; row++) {
    freqAxis.push((row * 8000) / (bins - 1));
    matrix.push(new Array(frames).fill(row === bandIndex ? 0 : -70));
  }
  return { matrix, freq_axis: freqAxis, time_axis: [...Array(frames).keys()],
           floor_db: -80, sample_rate: 16000 };
}
