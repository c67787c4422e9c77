import type { ApiClient } from "./api.js";
import type { JobBody } from "./types.js";

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Poll a job every 250 ms until it reaches a terminal state. The sleeper is
 * injectable so tests can run the cadence without real time passing.
 */
export async function pollJob(
  api: ApiClient,
  jobId: string,
  intervalMs = 250,
  timeoutMs = 120_000,
  sleeper: (ms: number) => Promise<void> = sleep,
): Promise<JobBody> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const body = await api.jobStatus(jobId);
    if (body.status === "done" || body.status === "failed") return body;
    if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
    await sleeper(intervalMs);
  }
}
