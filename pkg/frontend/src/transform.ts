/**
 * Display transform between slice voxel coordinates and canvas pixels.
 *
 * zoom is screen pixels per millimetre; in-plane spacing keeps anisotropic
 * slices at the right aspect ratio. Voxel centers sit at integer coordinates,
 * so image pixel i spans [i - 0.5, i + 0.5) in voxel space.
 */
export class SliceTransform {
  constructor(
    public zoom = 4,
    public panX = 10,
    public panY = 10,
    public spacingX = 1,
    public spacingY = 1,
  ) {}

  voxelToScreen(v: [number, number]): [number, number] {
    return [
      this.panX + (v[0] + 0.5) * this.spacingX * this.zoom,
      this.panY + (v[1] + 0.5) * this.spacingY * this.zoom,
    ];
  }

  screenToVoxel(s: [number, number]): [number, number] {
    return [
      (s[0] - this.panX) / (this.spacingX * this.zoom) - 0.5,
      (s[1] - this.panY) / (this.spacingY * this.zoom) - 0.5,
    ];
  }

  /** Rescale about a fixed screen point (wheel zoom under the cursor). */
  zoomAt(screen: [number, number], factor: number): void {
    const anchor = this.screenToVoxel(screen);
    this.zoom = Math.min(64, Math.max(0.25, this.zoom * factor));
    const moved = this.voxelToScreen(anchor);
    this.panX += screen[0] - moved[0];
    this.panY += screen[1] - moved[1];
  }

  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }
}
