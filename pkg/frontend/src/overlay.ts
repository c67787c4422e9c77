import type { SliceTransform } from "./transform.js";
import type { RleRow } from "./types.js";

/** The slice of CanvasRenderingContext2D the overlay painter needs. */
export interface RectPainter {
  fillStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
}

export interface OverlayStyle {
  color: string;
  alpha: number;
}

export const DEFAULT_STYLE: OverlayStyle = { color: "#ffd23f", alpha: 0.45 };

/**
 * Paint RLE mask rows as filled voxel rects. Restyling is purely client-side;
 * the rows never need re-fetching. Voxel (x, y) covers [x-0.5, x+0.5) x
 * [y-0.5, y+0.5) in voxel space.
 */
export function drawOverlay(
  ctx: RectPainter,
  rows: RleRow[],
  t: SliceTransform,
  style: OverlayStyle = DEFAULT_STYLE,
): void {
  ctx.fillStyle = style.color;
  ctx.globalAlpha = style.alpha;
  for (const row of rows) {
    for (const [x0, length] of row.runs) {
      const [sx, sy] = t.voxelToScreen([x0 - 0.5, row.y - 0.5]);
      const [ex, ey] = t.voxelToScreen([x0 + length - 0.5, row.y + 0.5]);
      ctx.fillRect(sx, sy, ex - sx, ey - sy);
    }
  }
  ctx.globalAlpha = 1.0;
}
