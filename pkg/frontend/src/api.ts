import type { JobBody, RleRow, VolumeInfo } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, detail);
}

/** Thin typed client over the segmentation service; no logic of its own. */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async listVolumes(): Promise<VolumeInfo[]> {
    const res = await this.fetchFn(`${this.base}/api/volumes`);
    await raiseForStatus(res);
    return res.json();
  }

  sliceUrl(id: string, axis: string, index: number, wl?: number, ww?: number): string {
    const query = wl !== undefined && ww !== undefined ? `?wl=${wl}&ww=${ww}` : "";
    return `${this.base}/api/volumes/${id}/slice/${axis}/${index}${query}`;
  }

  /**
   * Start a job. The contour arrives pre-serialized so its bytes on the wire
   * are exactly the shared schema (see contour.serializeContour).
   */
  async segment(volumeId: string, contourJson: string, params?: object): Promise<string> {
    const paramsPart = params ? `,"params":${JSON.stringify(params)}` : "";
    const body = `{"volume_id":${JSON.stringify(volumeId)},"contour":${contourJson}${paramsPart}}`;
    const res = await this.fetchFn(`${this.base}/api/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    await raiseForStatus(res);
    return (await res.json()).job_id;
  }

  async jobStatus(jobId: string): Promise<JobBody> {
    const res = await this.fetchFn(`${this.base}/api/jobs/${jobId}`);
    await raiseForStatus(res);
    return res.json();
  }

  async maskSlice(jobId: string, axis: string, index: number): Promise<RleRow[]> {
    const res = await this.fetchFn(`${this.base}/api/jobs/${jobId}/mask/slice/${axis}/${index}`);
    await raiseForStatus(res);
    return res.json();
  }

  maskUrl(jobId: string): string {
    return `${this.base}/api/jobs/${jobId}/mask`;
  }

  meshUrl(jobId: string, format: "obj" | "stl"): string {
    return `${this.base}/api/jobs/${jobId}/mesh?format=${format}`;
  }
}
