import type { Axis } from "./types.js";

export interface InitContour {
  slice_axis: Axis;
  slice_index: number;
  points: [number, number][];
}

/**
 * Serialize to the shared wire schema, byte-for-byte identical to the backend's
 * serializer: pinned key order, compact separators, and floats rendered the way
 * Python's repr renders them (integral values keep a trailing ".0"; everything
 * else is the shortest round-trip form, which String() already produces).
 */
export function serializeContour(c: InitContour): string {
  const num = (v: number) => (Number.isInteger(v) ? `${v}.0` : String(v));
  const pts = c.points.map(([x, y]) => `[${num(x)},${num(y)}]`).join(",");
  return `{"slice_axis":"${c.slice_axis}","slice_index":${c.slice_index},"points":[${pts}]}`;
}

export type CloseResult =
  | { ok: true; contour: InitContour }
  | { ok: false; message: string };

/** Click-to-add polygon state; the polygon closes implicitly (last to first). */
export class ContourDrawer {
  points: [number, number][] = [];

  addPoint(voxel: [number, number]): void {
    this.points.push([voxel[0], voxel[1]]);
  }

  /** Drop the duplicate vertex the second click of a double-click adds. */
  dropDuplicateTail(tolerance = 0.75): void {
    if (this.points.length < 2) return;
    const [ax, ay] = this.points[this.points.length - 2];
    const [bx, by] = this.points[this.points.length - 1];
    if (Math.hypot(bx - ax, by - ay) < tolerance) this.points.pop();
  }

  tryClose(axis: Axis, sliceIndex: number): CloseResult {
    if (this.points.length < 3) {
      return { ok: false, message: "a contour needs at least 3 points" };
    }
    return {
      ok: true,
      contour: {
        slice_axis: axis,
        slice_index: sliceIndex,
        points: this.points.map((p) => [p[0], p[1]]),
      },
    };
  }

  reset(): void {
    this.points = [];
  }
}
