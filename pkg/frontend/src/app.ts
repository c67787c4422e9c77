import { ApiClient, ApiError } from "./api.js";
import { ContourDrawer, serializeContour, type InitContour } from "./contour.js";
import { DEFAULT_STYLE, drawOverlay } from "./overlay.js";
import { pollJob } from "./polling.js";
import { SliceTransform } from "./transform.js";
import { AXIS_INDEX, planeAxes, type Axis, type JobBody, type RleRow, type SegStats, type VolumeInfo } from "./types.js";

interface Elements {
  volumeList: HTMLElement;
  axisSelect: HTMLSelectElement;
  sliceSlider: HTMLInputElement;
  sliceLabel: HTMLElement;
  wlInput: HTMLInputElement;
  wwInput: HTMLInputElement;
  drawButton: HTMLButtonElement;
  runButton: HTMLButtonElement;
  clearButton: HTMLButtonElement;
  statsPanel: HTMLElement;
  messagePanel: HTMLElement;
  retryButton: HTMLButtonElement;
  maskLink: HTMLAnchorElement;
  meshLink: HTMLAnchorElement;
  canvas: HTMLCanvasElement;
}

/**
 * The single-page controller: all segmentation happens server-side; this class
 * only tracks viewer state, forwards the drawn contour, polls the job, and
 * renders the returned overlay.
 */
export class App {
  api: ApiClient;
  volumes: VolumeInfo[] = [];
  volume: VolumeInfo | null = null;
  axis: Axis = "z";
  sliceIndex = 0;
  transform = new SliceTransform();
  drawing = false;
  drawer = new ContourDrawer();
  committed: InitContour | null = null;
  committedJson: string | null = null;
  jobId: string | null = null;
  jobBody: JobBody | null = null;
  overlayCache = new Map<string, RleRow[]>();
  activeRun: Promise<void> | null = null;

  private els!: Elements;
  private ctx: CanvasRenderingContext2D | null = null;
  private sliceImage: HTMLImageElement | null = null;
  private panFrom: [number, number] | null = null;

  constructor(
    private doc: Document,
    apiBase = "",
    fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {
    this.api = new ApiClient(apiBase, fetchFn);
  }

  mount(): void {
    const byId = <T extends HTMLElement>(id: string): T => {
      const el = this.doc.getElementById(id);
      if (!el) throw new Error(`missing element #${id}`);
      return el as T;
    };
    this.els = {
      volumeList: byId("volume-list"),
      axisSelect: byId<HTMLSelectElement>("axis-select"),
      sliceSlider: byId<HTMLInputElement>("slice-slider"),
      sliceLabel: byId("slice-label"),
      wlInput: byId<HTMLInputElement>("wl"),
      wwInput: byId<HTMLInputElement>("ww"),
      drawButton: byId<HTMLButtonElement>("draw-btn"),
      runButton: byId<HTMLButtonElement>("run-btn"),
      clearButton: byId<HTMLButtonElement>("clear-btn"),
      statsPanel: byId("stats"),
      messagePanel: byId("message"),
      retryButton: byId<HTMLButtonElement>("retry-btn"),
      maskLink: byId<HTMLAnchorElement>("download-mask"),
      meshLink: byId<HTMLAnchorElement>("download-mesh"),
      canvas: byId<HTMLCanvasElement>("viewer"),
    };
    try {
      this.ctx = this.els.canvas.getContext("2d");
    } catch {
      this.ctx = null; // headless test environments have no 2D context
    }

    const canvas = this.els.canvas;
    canvas.addEventListener("click", (e) => this.onCanvasClick(e as MouseEvent));
    canvas.addEventListener("dblclick", (e) => this.onCanvasDoubleClick(e as MouseEvent));
    canvas.addEventListener("wheel", (e) => this.onWheel(e as WheelEvent));
    canvas.addEventListener("mousedown", (e) => {
      if (!this.drawing) this.panFrom = [(e as MouseEvent).clientX, (e as MouseEvent).clientY];
    });
    canvas.addEventListener("mousemove", (e) => {
      if (this.panFrom) {
        const me = e as MouseEvent;
        this.transform.panBy(me.clientX - this.panFrom[0], me.clientY - this.panFrom[1]);
        this.panFrom = [me.clientX, me.clientY];
        this.redraw();
      }
    });
    this.doc.addEventListener("mouseup", () => (this.panFrom = null));
    this.doc.addEventListener("keydown", (e) => {
      if ((e as KeyboardEvent).key === "Enter" && this.drawing) this.closeContour();
    });

    this.els.axisSelect.addEventListener("change", () =>
      this.setAxis(this.els.axisSelect.value as Axis));
    this.els.sliceSlider.addEventListener("input", () =>
      this.setSlice(parseInt(this.els.sliceSlider.value, 10)));
    for (const input of [this.els.wlInput, this.els.wwInput]) {
      input.addEventListener("change", () => this.updateSliceImage());
    }
    this.els.drawButton.addEventListener("click", () => this.enterDrawMode());
    this.els.clearButton.addEventListener("click", () => this.clearContour());
    this.els.runButton.addEventListener("click", () => {
      this.activeRun = this.runSegmentation();
    });
    this.els.retryButton.addEventListener("click", () => {
      this.activeRun = this.runSegmentation();
    });
  }

  async init(): Promise<void> {
    this.volumes = await this.api.listVolumes();
    this.els.volumeList.textContent = "";
    for (const vol of this.volumes) {
      const item = this.doc.createElement("li");
      const button = this.doc.createElement("button");
      button.textContent = `${vol.id} (${vol.dims.join("x")})`;
      button.dataset.volumeId = vol.id;
      button.addEventListener("click", () => this.selectVolume(vol.id));
      item.appendChild(button);
      this.els.volumeList.appendChild(item);
    }
  }

  selectVolume(id: string): void {
    const vol = this.volumes.find((v) => v.id === id);
    if (!vol) throw new Error(`unknown volume ${id}`);
    this.volume = vol;
    this.resetJobState();
    this.committed = null;
    this.committedJson = null;
    this.drawer.reset();
    this.setAxis(this.axis, true);
  }

  setAxis(axis: Axis, recenter = false): void {
    if (!this.volume) return;
    this.axis = axis;
    const a = AXIS_INDEX[axis];
    const nSlices = this.volume.dims[a];
    this.sliceIndex = Math.min(this.sliceIndex, nSlices - 1);
    if (recenter) this.sliceIndex = Math.floor(nSlices / 2);
    const [a0, a1] = planeAxes(axis);
    this.transform.spacingX = this.volume.spacing[a0];
    this.transform.spacingY = this.volume.spacing[a1];
    this.els.sliceSlider.max = String(nSlices - 1);
    // drawing is per-slice; a plane change invalidates the work in progress
    this.drawer.reset();
    this.setSlice(this.sliceIndex);
  }

  setSlice(index: number): void {
    if (!this.volume) return;
    const nSlices = this.volume.dims[AXIS_INDEX[this.axis]];
    this.sliceIndex = Math.max(0, Math.min(nSlices - 1, index));
    this.els.sliceSlider.value = String(this.sliceIndex);
    this.els.sliceLabel.textContent = `${this.axis} = ${this.sliceIndex}`;
    this.updateSliceImage();
    void this.ensureOverlay();
  }

  private window(): [number | undefined, number | undefined] {
    const wl = parseFloat(this.els.wlInput.value);
    const ww = parseFloat(this.els.wwInput.value);
    return Number.isFinite(wl) && Number.isFinite(ww) ? [wl, ww] : [undefined, undefined];
  }

  updateSliceImage(): void {
    if (!this.volume) return;
    const [wl, ww] = this.window();
    const img = this.doc.createElement("img");
    img.addEventListener("load", () => {
      this.sliceImage = img;
      this.redraw();
    });
    img.src = this.api.sliceUrl(this.volume.id, this.axis, this.sliceIndex, wl, ww);
    this.redraw();
  }

  // --- drawing -----------------------------------------------------------

  enterDrawMode(): void {
    this.drawing = true;
    this.drawer.reset();
    this.committed = null;
    this.committedJson = null;
    this.message("click to add points; Enter or double-click closes");
  }

  private eventToVoxel(e: MouseEvent): [number, number] {
    const rect = this.els.canvas.getBoundingClientRect();
    return this.transform.screenToVoxel([e.clientX - rect.left, e.clientY - rect.top]);
  }

  onCanvasClick(e: MouseEvent): void {
    if (!this.drawing) return;
    this.drawer.addPoint(this.eventToVoxel(e));
    this.redraw();
  }

  onCanvasDoubleClick(e: MouseEvent): void {
    if (!this.drawing) return;
    this.drawer.dropDuplicateTail();
    this.closeContour();
  }

  onWheel(e: WheelEvent): void {
    e.preventDefault();
    if (e.ctrlKey) {
      const rect = this.els.canvas.getBoundingClientRect();
      this.transform.zoomAt(
        [e.clientX - rect.left, e.clientY - rect.top],
        e.deltaY < 0 ? 1.25 : 0.8,
      );
      this.redraw();
    } else {
      this.setSlice(this.sliceIndex + (e.deltaY > 0 ? 1 : -1));
    }
  }

  closeContour(): void {
    const result = this.drawer.tryClose(this.axis, this.sliceIndex);
    if (!result.ok) {
      this.message(result.message);
      return;
    }
    this.committed = result.contour;
    this.committedJson = serializeContour(result.contour);
    this.drawing = false;
    this.message(`contour committed (${result.contour.points.length} points)`);
    this.redraw();
  }

  clearContour(): void {
    this.drawing = false;
    this.drawer.reset();
    this.committed = null;
    this.committedJson = null;
    this.resetJobState();
    this.redraw();
  }

  // --- job lifecycle -------------------------------------------------------

  private resetJobState(): void {
    this.jobId = null;
    this.jobBody = null;
    this.overlayCache.clear();
    this.els.statsPanel.textContent = "";
    this.els.retryButton.hidden = true;
    this.els.maskLink.hidden = true;
    this.els.meshLink.hidden = true;
  }

  async runSegmentation(params?: object): Promise<void> {
    if (!this.volume || !this.committedJson) {
      this.message("draw and close a contour first");
      return;
    }
    // previous overlay must be gone before the new job starts
    this.resetJobState();
    this.redraw();
    this.message("segmenting...");
    try {
      this.jobId = await this.api.segment(this.volume.id, this.committedJson, params);
      this.jobBody = await pollJob(this.api, this.jobId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.message(err.message);
        this.els.retryButton.hidden = false;
      } else {
        this.message(err instanceof Error ? err.message : String(err));
      }
      return;
    }
    if (this.jobBody.status === "failed") {
      this.message(this.jobBody.error ?? "segmentation failed");
      this.redraw();
      return;
    }
    this.showStats(this.jobBody.stats!);
    this.els.maskLink.href = this.api.maskUrl(this.jobId);
    this.els.maskLink.hidden = false;
    this.els.meshLink.href = this.api.meshUrl(this.jobId, "obj");
    this.els.meshLink.hidden = false;
    this.message("done");
    await this.ensureOverlay();
  }

  private showStats(stats: SegStats): void {
    this.els.statsPanel.textContent =
      `volume ${stats.volume_cm3.toFixed(3)} cm3 | ` +
      `${stats.iterations_run} iterations (${stats.termination_reason}) | ` +
      `${stats.wall_time.toFixed(2)} s | ` +
      `${stats.vertex_count} vertices`;
  }

  /** Overlay rows for the displayed slice, fetched once and restyled locally. */
  async ensureOverlay(): Promise<RleRow[] | null> {
    if (!this.jobId || this.jobBody?.status !== "done") return null;
    const key = `${this.axis}:${this.sliceIndex}`;
    if (!this.overlayCache.has(key)) {
      const rows = await this.api.maskSlice(this.jobId, this.axis, this.sliceIndex);
      this.overlayCache.set(key, rows);
    }
    this.redraw();
    return this.overlayCache.get(key)!;
  }

  message(text: string): void {
    this.els.messagePanel.textContent = text;
  }

  // --- rendering -----------------------------------------------------------

  redraw(): void {
    const ctx = this.ctx;
    if (!ctx || !this.volume) return;
    const canvas = this.els.canvas;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const [a0, a1] = planeAxes(this.axis);
    const t = this.transform;

    if (this.sliceImage) {
      const [x0, y0] = t.voxelToScreen([-0.5, -0.5]);
      const [x1, y1] = t.voxelToScreen([
        this.volume.dims[a0] - 0.5,
        this.volume.dims[a1] - 0.5,
      ]);
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(this.sliceImage, x0, y0, x1 - x0, y1 - y0);
    }

    const key = `${this.axis}:${this.sliceIndex}`;
    const rows = this.overlayCache.get(key);
    if (rows && this.jobBody?.status === "done") {
      drawOverlay(ctx, rows, t, DEFAULT_STYLE);
    }

    const paintPolygon = (pts: [number, number][], closed: boolean, color: string) => {
      if (pts.length === 0) return;
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      const [sx, sy] = t.voxelToScreen(pts[0]);
      ctx.moveTo(sx, sy);
      for (const p of pts.slice(1)) {
        const [px, py] = t.voxelToScreen(p);
        ctx.lineTo(px, py);
      }
      if (closed) ctx.closePath();
      ctx.stroke();
    };
    if (this.committed && this.committed.slice_index === this.sliceIndex
        && this.committed.slice_axis === this.axis) {
      paintPolygon(this.committed.points, true, "#ffe14d");
    }
    if (this.drawing) paintPolygon(this.drawer.points, false, "#7fd4ff");
  }
}
