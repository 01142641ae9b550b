/** Canvas scatter rendering and navigation.
 *
 * Points are drawn straight to a canvas (no per-point DOM) so 1e5 points
 * stay interactive; zoom/pan is a pure viewport transform, no refetch.
 * Rendering goes through a minimal 2D-context interface so tests can pass a
 * recording fake. */

import type { EmbeddingPoint } from "./api.js";

export interface Viewport {
  /** world units per CSS pixel */
  scale: number;
  /** world coordinate of the canvas left edge */
  originX: number;
  /** world coordinate of the canvas top edge */
  originY: number;
}

export interface Canvas2DLike {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
}

/** No-op context for headless environments without canvas support. */
export function nullContext(): Canvas2DLike {
  const noop = () => undefined;
  return {
    fillStyle: "", strokeStyle: "", lineWidth: 1,
    clearRect: noop, fillRect: noop, beginPath: noop, arc: noop, fill: noop,
    stroke: noop, moveTo: noop, lineTo: noop, closePath: noop,
  };
}

export function fitViewport(points: { x: number; y: number }[], width: number,
                            height: number, padding = 20): Viewport {
  if (points.length === 0) return { scale: 1, originX: 0, originY: 0 };
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of points) {
    if (p.x < minX) minX = p.x;
    if (p.x > maxX) maxX = p.x;
    if (p.y < minY) minY = p.y;
    if (p.y > maxY) maxY = p.y;
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.max(spanX / Math.max(width - 2 * padding, 1),
                         spanY / Math.max(height - 2 * padding, 1));
  const centerX = (minX + maxX) / 2;
  const centerY = (minY + maxY) / 2;
  return {
    scale,
    originX: centerX - (width / 2) * scale,
    originY: centerY - (height / 2) * scale,
  };
}

export function worldToScreen(v: Viewport, x: number, y: number)
    : [number, number] {
  return [(x - v.originX) / v.scale, (y - v.originY) / v.scale];
}

export function screenToWorld(v: Viewport, sx: number, sy: number)
    : [number, number] {
  return [v.originX + sx * v.scale, v.originY + sy * v.scale];
}

/** Zoom by `factor` keeping the world point under the cursor fixed. */
export function zoomAt(v: Viewport, sx: number, sy: number,
                       factor: number): Viewport {
  const [wx, wy] = screenToWorld(v, sx, sy);
  const scale = v.scale / factor;
  return { scale, originX: wx - sx * scale, originY: wy - sy * scale };
}

export function pan(v: Viewport, dxPx: number, dyPx: number): Viewport {
  return {
    scale: v.scale,
    originX: v.originX - dxPx * v.scale,
    originY: v.originY - dyPx * v.scale,
  };
}

/** Index of the nearest point within radiusPx of a screen position, or -1. */
export function hitTest(points: { x: number; y: number }[], v: Viewport,
                        sx: number, sy: number, radiusPx = 6): number {
  let best = -1;
  let bestD2 = radiusPx * radiusPx;
  for (let i = 0; i < points.length; i++) {
    const [px, py] = worldToScreen(v, points[i].x, points[i].y);
    const d2 = (px - sx) * (px - sx) + (py - sy) * (py - sy);
    if (d2 <= bestD2) {
      bestD2 = d2;
      best = i;
    }
  }
  return best;
}

export interface DrawOptions {
  pointSize?: number;
  highlight?: Set<number>;
  visible?: boolean[];
}

/** Draw every visible point; returns how many were drawn. */
export function drawScatter(ctx: Canvas2DLike, points: EmbeddingPoint[],
                            colors: string[], v: Viewport, width: number,
                            height: number, options: DrawOptions = {}): number {
  const size = options.pointSize ?? 4;
  ctx.clearRect(0, 0, width, height);
  let drawn = 0;
  for (let i = 0; i < points.length; i++) {
    if (options.visible && !options.visible[i]) continue;
    const [sx, sy] = worldToScreen(v, points[i].x, points[i].y);
    if (sx < -size || sy < -size || sx > width + size || sy > height + size) {
      continue;
    }
    ctx.fillStyle = colors[i];
    ctx.fillRect(sx - size / 2, sy - size / 2, size, size);
    drawn++;
  }
  if (options.highlight) {
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    for (const i of options.highlight) {
      const [sx, sy] = worldToScreen(v, points[i].x, points[i].y);
      ctx.beginPath();
      ctx.arc(sx, sy, size + 2, 0, Math.PI * 2);
      ctx.stroke();
    }
  }
  return drawn;
}
