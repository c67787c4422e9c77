import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { pollJob } from "../src/polling.js";
import { serializeContour } from "../src/contour.js";

function fakeFetch(handler: (url: string, init?: RequestInit) => { status: number; body: unknown }) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({ url, init });
    const { status, body } = handler(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return { fn, calls };
}

describe("ApiClient", () => {
  it("embeds the serialized contour bytes verbatim in the segment body", async () => {
    const { fn, calls } = fakeFetch(() => ({ status: 200, body: { job_id: "j1" } }));
    const api = new ApiClient("http://host", fn);
    const contourJson = serializeContour({
      slice_axis: "z",
      slice_index: 9,
      points: [[1.5, 2.0], [8.25, 2.0], [4.0, 7.75]],
    });
    const jobId = await api.segment("vol1", contourJson);
    expect(jobId).toBe("j1");
    expect(calls[0].url).toBe("http://host/api/segment");
    const body = calls[0].init?.body as string;
    expect(body).toBe(`{"volume_id":"vol1","contour":${contourJson}}`);
  });

  it("passes params as a separate field when given", async () => {
    const { fn, calls } = fakeFetch(() => ({ status: 200, body: { job_id: "j2" } }));
    const api = new ApiClient("", fn);
    await api.segment("v", '{"slice_axis":"z","slice_index":0,"points":[[0.5,0.5],[2.5,0.5],[1.5,2.5]]}',
      { smooth_lambda: 0.3 });
    expect(calls[0].init?.body as string).toContain('"params":{"smooth_lambda":0.3}');
  });

  it("surfaces the server's detail message on errors", async () => {
    const { fn } = fakeFetch(() => ({ status: 409, body: { detail: "volume 'v' already has a running job" } }));
    const api = new ApiClient("", fn);
    await expect(api.listVolumes()).rejects.toThrowError(ApiError);
    try {
      await api.listVolumes();
    } catch (err) {
      expect((err as ApiError).status).toBe(409);
      expect((err as ApiError).message).toBe("volume 'v' already has a running job");
    }
  });

  it("builds slice urls with optional window parameters", () => {
    const api = new ApiClient("http://h");
    expect(api.sliceUrl("v", "z", 12)).toBe("http://h/api/volumes/v/slice/z/12");
    expect(api.sliceUrl("v", "x", 3, 50, 120)).toBe("http://h/api/volumes/v/slice/x/3?wl=50&ww=120");
  });
});

describe("pollJob", () => {
  it("polls at the 250 ms cadence until done", async () => {
    const statuses = ["pending", "running", "running", "done"] as const;
    let call = 0;
    const { fn } = fakeFetch(() => ({
      status: 200,
      body: call < statuses.length - 1
        ? { status: statuses[call++] }
        : { status: "done", stats: { iterations_run: 5 } },
    }));
    const api = new ApiClient("", fn);
    const sleeps: number[] = [];
    const body = await pollJob(api, "j", 250, 10_000, async (ms) => {
      sleeps.push(ms);
    });
    expect(body.status).toBe("done");
    expect(sleeps).toEqual([250, 250, 250]);
  });

  it("returns failed bodies instead of looping forever", async () => {
    const { fn } = fakeFetch(() => ({ status: 200, body: { status: "failed", error: "contour too small" } }));
    const api = new ApiClient("", fn);
    const body = await pollJob(api, "j", 1, 1000, async () => {});
    expect(body.status).toBe("failed");
    expect(body.error).toBe("contour too small");
  });
});
