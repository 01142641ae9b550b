/** Color assignment for the scatter views.
 *
 * A color-by domain is built once from all visible points and shared between
 * panels, so the same label value gets the same color in a side-by-side
 * comparison. */

import type { EmbeddingPoint } from "./api.js";

export type ColorBy = "time_of_day" | "day_of_year" | "parent_directory"
  | "cluster_id" | "ground_truth";

export const COLOR_BY_CHOICES: ColorBy[] = [
  "time_of_day", "day_of_year", "parent_directory", "cluster_id",
  "ground_truth"];

export const MISSING_COLOR = "#6b7280";

const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#d62728",
];

/** The value a point contributes to a color-by domain; null = unlabeled. */
export function labelValue(point: EmbeddingPoint, colorBy: ColorBy)
    : string | number | null {
  const labels = point.labels ?? {};
  switch (colorBy) {
    case "time_of_day":
      return labels.time_of_day ?? null;
    case "day_of_year":
      return labels.day_of_year ?? null;
    case "parent_directory":
      return labels.parent_directory ?? null;
    case "cluster_id":
      return labels.cluster_id ?? null;
    case "ground_truth": {
      const classes = labels.ground_truth;
      if (!classes || classes.length === 0) return null;
      return classes.join("+");
    }
  }
}

/** Sorted distinct label values over every provided point set. */
export function buildDomain(pointSets: EmbeddingPoint[][], colorBy: ColorBy)
    : (string | number)[] {
  const seen = new Set<string | number>();
  for (const points of pointSets) {
    for (const point of points) {
      const value = labelValue(point, colorBy);
      if (value !== null) seen.add(value);
    }
  }
  return [...seen].sort((a, b) =>
    typeof a === "number" && typeof b === "number"
      ? a - b : String(a).localeCompare(String(b)));
}

/** Hour of day on a cyclic hue wheel so 23:00 sits next to 00:00. */
export function hourColor(hour: number): string {
  const hue = Math.round((hour / 24) * 360);
  return `hsl(${hue}, 70%, 55%)`;
}

export function categoricalColor(value: string | number,
                                 domain: (string | number)[]): string {
  const index = domain.indexOf(value);
  if (index < 0) return MISSING_COLOR;
  return PALETTE[index % PALETTE.length];
}

export function colorFor(point: EmbeddingPoint, colorBy: ColorBy,
                         domain: (string | number)[]): string {
  const value = labelValue(point, colorBy);
  if (value === null) return MISSING_COLOR;
  if (colorBy === "time_of_day") return hourColor(value as number);
  return categoricalColor(value, domain);
}
