/** Lasso selection: freehand polygon (or rectangle) over the scatter. */

import type { EmbeddingPoint, SelectionPoint } from "./api.js";
import type { Viewport } from "./scatter.js";
import { worldToScreen } from "./scatter.js";

export type Polygon = [number, number][];

/** Ray-casting point-in-polygon test in screen space. */
export function pointInPolygon(polygon: Polygon, x: number, y: number): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    const crosses = (yi > y) !== (yj > y)
      && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi;
    if (crosses) inside = !inside;
  }
  return inside;
}

export function rectPolygon(x0: number, y0: number, x1: number,
                            y1: number): Polygon {
  return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
}

/** Indices of the points inside a screen-space lasso polygon. */
export function selectPoints(points: { x: number; y: number }[], v: Viewport,
                             polygon: Polygon,
                             visible?: boolean[]): number[] {
  if (polygon.length < 3) return [];
  const selected: number[] = [];
  for (let i = 0; i < points.length; i++) {
    if (visible && !visible[i]) continue;
    const [sx, sy] = worldToScreen(v, points[i].x, points[i].y);
    if (pointInPolygon(polygon, sx, sy)) selected.push(i);
  }
  return selected;
}

/** Request body for POST /selection/export: one row per selected point. */
export function toExportPayload(points: EmbeddingPoint[], indices: number[])
    : SelectionPoint[] {
  return indices.map((i) => ({
    file: points[i].file,
    start: points[i].start,
    end: points[i].end,
  }));
}
