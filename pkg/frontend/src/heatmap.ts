/** Activity heatmap view model: dates on y, hours 0-23 on x. */

import type { HeatmapResponse } from "./api.js";

export interface HeatmapModel {
  dates: string[];
  maxCount: number;
  total: number;
  cells: number[][];
}

export function heatmapModel(response: HeatmapResponse): HeatmapModel {
  let maxCount = 0;
  let total = 0;
  for (const row of response.cells) {
    for (const value of row) {
      if (value > maxCount) maxCount = value;
      total += value;
    }
  }
  return { dates: response.dates, maxCount, total, cells: response.cells };
}

/** Cell color on a dark-to-warm ramp; zero stays near-black. */
export function cellColor(count: number, maxCount: number): string {
  if (maxCount <= 0 || count <= 0) return "#16181d";
  const t = count / maxCount;
  const hue = 50 - Math.round(t * 50);        // yellow -> red
  const light = 25 + Math.round(t * 35);
  return `hsl(${hue}, 90%, ${light}%)`;
}
